#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "flowcurv/model.hpp"

namespace flowcurv {

/// Chua diode characteristic: three affine pieces joined at x = -1 and x = 1.
template <typename S, typename T>
S pwl_k(const S& x, T a, T b, int branch) {
  switch (branch) {
    case 1:
      return b * x + S(a - b);
    case -1:
      return b * x + S(b - a);
    default:
      return a * x;
  }
}

inline double pwl_k(double x, double a, double b) { return pwl_k(x, a, b, pwl_branch(x)); }

/// Smooth odd replacement of the diode characteristic.
template <typename S, typename T>
S cubic_k(const S& x, T c1, T c2) {
  return c1 * (x * x * x) + c2 * x;
}

inline double cubic_k(double x, double c1, double c2) { return cubic_k<double, double>(x, c1, c2); }

struct BuiltinInfo {
  std::string name;
  std::string description;
};

/// The seven built-in models in registry order.
const std::vector<BuiltinInfo>& builtin_models();

/// Builds a registry model, optionally overriding some default parameters.
/// Throws ConfigError for unknown names or parameters.
ModelDef make_builtin(std::string_view name, const ParamSet& overrides = {});

struct FixedPointOptions {
  /// Also report zeros of affine pieces that lie outside their own region.
  bool include_virtual = false;
  int newton_max_iter = 100;
  /// Half-width of the multi-start lattice used when a smooth model has no
  /// initial guesses.
  double lattice_radius = 3.0;
  int lattice_points_per_axis = 3;
};

/// Equilibria of a model, sorted lexicographically.
///
/// Piecewise-linear models are solved region by region. Smooth models whose
/// rows other than the first are linear are reduced to an odd cubic along the
/// null line of those rows. Everything else uses damped Newton from the
/// model's guesses, or from a lattice when there are none. Failed Newton runs
/// from user-supplied guesses are reported through `diagnostics`.
std::vector<FixedPoint> fixed_points(const ModelDef& model, const FixedPointOptions& options = {},
                                     std::vector<std::string>* diagnostics = nullptr);

/// Affine piece A x + c of a piecewise-linear (or linear) field in a region.
struct AffinePiece {
  MatrixX<long double> A;
  VectorX<long double> c;
};
AffinePiece affine_piece(const ModelDef& model, std::optional<Region> region);

/// Human-readable label of a region: one character per pwl term
/// ('-' below -1, '0' in the middle, '+' above 1).
std::string region_label(const ModelDef& model, std::optional<Region> region);

}  // namespace flowcurv
