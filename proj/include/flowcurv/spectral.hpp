#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>

#include "flowcurv/model.hpp"

namespace flowcurv {

/// Eigen-decomposition of the Jacobian at a point. Eigenvalues are sorted by
/// descending |Re| (ties: larger Im first); column i of `right` and `left`
/// belong to eigenvalue i. Vectors have unit norm, and the entry of largest
/// magnitude is real and positive.
struct Spectrum {
  Eigen::VectorXd point;
  std::optional<Region> region;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd right;
  Eigen::MatrixXcd left;

  std::complex<double> fast() const { return eigenvalues[0]; }
  Eigen::VectorXcd left_fast() const { return left.col(0); }
  bool is_real(Eigen::Index i) const;
};

/// Throws NumericalError when an eigenvector residual exceeds
/// 1e-8 (|lambda| + 1) |y| (defective or near-defective Jacobian).
Spectrum spectrum_at(const ModelDef& model, const Eigen::VectorXd& x, std::optional<Region> region = std::nullopt);
Spectrum spectrum_of(const Eigen::MatrixXd& jacobian);

/// Thrown when the fast eigenvalue is complex and no real plane exists.
class ComplexFastEigenvalue : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

enum class FastPolicy {
  /// Fail with ComplexFastEigenvalue when the fast eigenvalue is complex.
  Strict,
  /// Use the real eigenvalue of largest |Re| when the fast one is complex.
  DominantReal,
};

/// normal . x + offset = 0 with a unit normal whose first nonzero entry is
/// positive.
struct Hyperplane {
  Eigen::VectorXd normal;
  double offset = 0;
  FixedPoint base;
  /// Eigenvalue whose left eigenvector is the normal.
  double lambda = 0;
  /// Index of that eigenvalue in the spectrum.
  int eigen_index = 0;
  /// True when the overall fast eigenvalue was complex.
  bool fast_pair_complex = false;

  double operator()(const Eigen::VectorXd& x) const { return normal.dot(x) + offset; }
};

/// Tangent linear system plane through `fp`: the left eigenvector of the fast
/// eigenvalue is the normal.
Hyperplane tls_hyperplane(const ModelDef& model, const FixedPoint& fp, FastPolicy policy = FastPolicy::DominantReal);

enum class PlaneScaling {
  Canonical,      // unit normal, first nonzero positive
  UnitCoefficient,  // divide so that coefficient `index` equals 1
  Lambda,         // lambda times the canonical normal
};

struct PlaneDisplay {
  PlaneScaling scaling = PlaneScaling::Canonical;
  int index = 0;  // UnitCoefficient: 0-based coefficient
};

/// Coefficients c_1..c_n followed by the offset under a display scaling.
Eigen::VectorXd scaled_coefficients(const Hyperplane& plane, PlaneDisplay display);

/// "2.8759 x1 - 3.9421 x2 + x3 + 2.8139 = 0" with `digits` significant digits.
std::string plane_equation(const Hyperplane& plane, PlaneDisplay display, int digits = 6);

struct PlaneCheck {
  std::size_t samples = 0;
  std::size_t excluded = 0;
  double max_residual = 0;
  double mean_residual = 0;
  bool invariant = false;
};

/// |n . V - lambda Pi| / (1 + |lambda Pi|) at random points of the plane's
/// region within `spread` of the base point. Points of other regions are
/// excluded and counted.
PlaneCheck darboux_check_plane(const ModelDef& model, const Hyperplane& plane, std::size_t samples,
                               double spread = 2.0, std::uint64_t seed = 1);

struct Coplanarity {
  /// |V . (Y_2 ^ ... ^ Y_n)| and |V . tY_1| with their natural scales.
  double r1 = 0, r2 = 0;
  double scale1 = 0, scale2 = 0;
  /// 1 - |cos| between the slow wedge and the fast left eigenvector.
  double parallelism = 0;

  double scaled1() const { return scale1 > 0 ? r1 / scale1 : r1; }
  double scaled2() const { return scale2 > 0 ? r2 / scale2 : r2; }
};

/// Coplanarity and orthogonality residuals at x for the fast eigenvalue
/// `fast_index` of `spectrum`. Complex slow pairs contribute their real and
/// imaginary parts. Throws NumericalError when the fast eigenvalue is complex
/// or the slow eigenvectors are (numerically) dependent.
Coplanarity coplanarity_equivalence(const ModelDef& model, const Eigen::VectorXd& x, const Spectrum& spectrum,
                                    int fast_index = 0);

struct Hypercoplanarity {
  double phi_lu = 0;
  double phi_wedge = 0;
  double relative_difference = 0;
};

/// det(d_1..d_n) by LU against V . (gamma ^ gamma_dot ^ ...) by minors.
Hypercoplanarity hypercoplanarity_check(const ModelDef& model, const Eigen::VectorXd& x,
                                        std::optional<Region> region = std::nullopt);

}  // namespace flowcurv
