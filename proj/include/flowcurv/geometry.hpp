#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "flowcurv/derivatives.hpp"

namespace flowcurv {

/// Relative norm below which a Gram-Schmidt vector counts as lost rank.
inline constexpr double kDegeneracyThreshold = 1e-12;

/// Unnormalized orthogonal basis u_1..u_m of an ordered vector list, with the
/// coefficients v_i = sum_(j<=i) beta(i, j) u_j (beta unit lower triangular).
struct OrthoBasis {
  std::vector<Eigen::VectorXd> u;
  Eigen::MatrixXd beta;
  /// 0-based index of the first vector whose orthogonal part vanished.
  std::optional<int> degenerate_index;

  bool degenerate() const { return degenerate_index.has_value(); }
};

/// Gram-Schmidt without normalization (modified, with one reorthogonalization
/// pass). Throws std::invalid_argument when there are more vectors than
/// dimensions or the dimensions disagree.
OrthoBasis gram_schmidt(const std::vector<Eigen::VectorXd>& vectors);

/// kappa_i = |u_(i+1)| / (|u_1| |u_i|), i = 1..m-1 (stored 0-based).
struct CurvatureSet {
  std::vector<double> kappa;
  /// Signed torsion, reported for three vectors in 3-space.
  std::optional<double> torsion;
  std::optional<int> degenerate_index;
};

/// Curvatures of the curve whose derivative stack is `vectors`. After a
/// degenerate vector the curvature that divides by it is reported as zero
/// and the following ones as NaN. Throws std::domain_error for zero velocity.
CurvatureSet curvatures(const std::vector<Eigen::VectorXd>& vectors);

/// Curvatures from the first n vectors of a derivative stack.
template <typename S>
CurvatureSet curvatures(const DerivStack<S>& stack) {
  const int n = static_cast<int>(stack.point.size());
  if (stack.order() < n) throw std::invalid_argument("derivative stack shorter than the dimension");
  std::vector<Eigen::VectorXd> v;
  for (int k = 1; k <= n; ++k) v.push_back(stack.d(k).template cast<double>());
  return curvatures(v);
}

/// |gamma ^ V| / |V|^3. Throws std::domain_error for V = 0.
double curvature1_3d(const Eigen::Vector3d& V, const Eigen::Vector3d& gamma);

/// -gamma_dot . (gamma ^ V) / |gamma ^ V|^2. Throws std::domain_error when
/// gamma ^ V vanishes.
double torsion_3d(const Eigen::Vector3d& V, const Eigen::Vector3d& gamma, const Eigen::Vector3d& gamma_dot);

/// | |det S| - prod |u_i| | / max(1, prod |u_i|) for a square stack S.
double identity_a10_residual(const Eigen::MatrixXd& stack);

/// Relative residual of det(J a_1, ..., J a_n) = det(J) det(a_1, ..., a_n).
double identity_a15_residual(const Eigen::MatrixXd& J, const Eigen::MatrixXd& a);

/// Relative residual of sum_k det(a_1, ..., J a_k, ..., a_n) = Tr(J) det(a).
double identity_a16_residual(const Eigen::MatrixXd& J, const Eigen::MatrixXd& a);

/// Generalized cross product of the n-1 columns of B: the vector w with
/// w . v = det([v, B]) for every v.
template <typename S>
VectorX<S> wedge(const MatrixX<S>& B) {
  const Eigen::Index n = B.rows();
  if (B.cols() != n - 1) throw std::invalid_argument("wedge needs n-1 vectors in n-space");
  VectorX<S> w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    MatrixX<S> minor(n - 1, n - 1);
    for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
      if (r == i) continue;
      minor.row(rr++) = B.row(r);
    }
    const S det = n == 1 ? S(1) : minor.determinant();
    w[i] = (i % 2 == 0) ? det : -det;
  }
  return w;
}

}  // namespace flowcurv
