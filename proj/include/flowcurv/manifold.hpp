#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowcurv/derivatives.hpp"
#include "flowcurv/integrate.hpp"

namespace flowcurv {

/// det(d_1, ..., d_n): zero on the slow invariant manifold.
double phi(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region = std::nullopt);

/// det(d_1, ..., d_(n-1), d_(n+1)): the derivative of phi along the flow.
double lie_phi(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region = std::nullopt);

/// |lie - Tr(J) phi| / (1 + |Tr(J) phi|).
double darboux_residual(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region = std::nullopt);

struct ManifoldSample {
  Eigen::VectorXd point;
  double phi = 0;
  double lie = 0;
  double cofactor_residual = 0;
  std::optional<Region> region;
};

ManifoldSample sample(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region = std::nullopt);

/// Samples at many points, evaluated on up to `threads` workers; output order
/// follows input order.
std::vector<ManifoldSample> sample_points(const ModelDef& model, const std::vector<Eigen::VectorXd>& points,
                                          int threads = 1);

/// Largest |phi| at x +- step * e_i; the scale used for "phi = 0 to rounding".
double local_phi_scale(const ModelDef& model, const Eigen::VectorXd& x, double step = 0.1,
                       std::optional<Region> region = std::nullopt);

struct GridAxis {
  int index = 0;  // state coordinate (0-based)
  double lo = 0, hi = 0;
  int count = 2;
};

struct GridSpec {
  std::vector<GridAxis> axes;
  /// Values of the coordinates that are not axes.
  Eigen::VectorXd base;
};

struct ZeroPoint {
  Eigen::VectorXd point;
  double phi = 0;
  std::optional<Region> region;
  /// Grid: axis of the bracketing edge; trajectory: -1.
  int axis = -1;
  /// Trajectory: refined crossing time.
  double time = 0;
  /// Largest |phi| over the bracketing pair.
  double bracket_scale = 0;
};

struct ZeroSet {
  std::vector<ZeroPoint> points;
  std::size_t nonfinite_nodes = 0;
  /// Sign changes whose bisection stalled at a discontinuity of phi.
  std::size_t rejected_brackets = 0;
  /// Trajectory input on which phi vanished identically.
  bool degenerate = false;
  std::vector<std::string> warnings;
};

struct ZeroTolerance {
  double abs = 1e-300;
  double rel = 1e-6;
};

/// Edge-sign bisection of phi on a 2-D or 3-D grid. Points are sorted
/// lexicographically.
ZeroSet zero_set_grid(const ModelDef& model, const GridSpec& grid, int threads = 1, ZeroTolerance tol = {});

/// Crossings of phi = 0 along a trajectory, refined in time to 1e-10 by
/// re-integrating from the preceding sample.
ZeroSet zero_crossings_on_trajectory(const ModelDef& model, const Trajectory& traj, ZeroTolerance tol = {},
                                     const IntegrateOptions& reintegration = {});

/// Split of a slow-fast system: fast components with their constraint rows.
struct SlowFastSplit {
  std::vector<int> fast_indices;
  double epsilon = 0;
  /// Rows of the right-hand side whose zero set is the singular approximation;
  /// defaults to fast_indices.
  std::vector<int> constraint_rows;
  /// Box of the slow variables (lo, hi) per coordinate; fast entries ignored.
  Eigen::VectorXd lo, hi;
  /// Parameter that scales like 1/epsilon, if the model exposes one.
  std::optional<std::string> stiffness_param;
};

struct GspSummary {
  double epsilon = 0;
  std::size_t samples = 0;
  std::size_t failures = 0;
  /// Statistics of |phi| / |grad phi| on the singular approximation.
  double max = 0;
  double mean = 0;
};

/// |phi| / |grad phi| on the solved singular approximation at the model's
/// epsilon. Throws std::invalid_argument for epsilon <= 0.
GspSummary gsp_order0_residual(const ModelDef& model, const SlowFastSplit& split, std::size_t samples,
                               std::uint64_t seed = 1);

/// The same summary with the stiffness parameter multiplied by each factor
/// (epsilon divided by it).
std::vector<GspSummary> gsp_order0_profile(const ModelDef& model, const SlowFastSplit& split, std::size_t samples,
                                           const std::vector<double>& stiffness_factors, std::uint64_t seed = 1);

/// Projection of x onto f_row = 0 along coordinate `solve_index` by Newton.
std::optional<Eigen::VectorXd> solve_row_for(const ModelDef& model, int row, int solve_index, Eigen::VectorXd x);

enum class FactorVerdict { FirstIntegral, Invariant, NotInvariant };

struct FactorReport {
  std::string factor;
  /// Zero-set points found by projection and the largest scaled |phi| there.
  std::size_t zero_points = 0;
  double max_scaled_phi = 0;
  /// Quadratic cofactor fit L_V F = K F: basis labels and coefficients.
  std::vector<std::string> basis;
  std::vector<double> cofactor;
  double fit_residual = 0;
  double max_lie_scaled = 0;
  FactorVerdict verdict = FactorVerdict::NotInvariant;
};

struct Box {
  Eigen::VectorXd lo, hi;
};

/// Checks that phi vanishes on the zero set of `factor` (an expression in
/// the model's state and parameters) and fits its Darboux cofactor.
/// Throws std::invalid_argument when the factor vanishes on all samples.
FactorReport factor_check(const ModelDef& model, const std::string& factor, const Box& box, std::size_t samples = 200,
                          std::uint64_t seed = 1);

std::string to_string(FactorVerdict verdict);

}  // namespace flowcurv
