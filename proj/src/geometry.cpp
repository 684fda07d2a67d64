#include "flowcurv/geometry.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flowcurv {

OrthoBasis gram_schmidt(const std::vector<Eigen::VectorXd>& vectors) {
  const int m = static_cast<int>(vectors.size());
  OrthoBasis basis;
  basis.beta = Eigen::MatrixXd::Identity(m, m);
  if (m == 0) return basis;
  const Eigen::Index n = vectors.front().size();
  if (m > n) throw std::invalid_argument("Gram-Schmidt needs at most as many vectors as dimensions");
  for (const auto& v : vectors)
    if (v.size() != n) throw std::invalid_argument("Gram-Schmidt vectors differ in dimension");

  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd w = vectors[static_cast<std::size_t>(i)];
    const double input_norm = w.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < i; ++j) {
        const Eigen::VectorXd& uj = basis.u[static_cast<std::size_t>(j)];
        const double nn = uj.squaredNorm();
        if (nn == 0.0) continue;
        const double coef = uj.dot(w) / nn;
        w -= coef * uj;
        basis.beta(i, j) += coef;
      }
    }
    if (w.norm() <= kDegeneracyThreshold * input_norm || input_norm == 0.0) {
      if (!basis.degenerate_index) basis.degenerate_index = i;
      w.setZero();
    }
    basis.u.push_back(w);
  }
  return basis;
}

CurvatureSet curvatures(const std::vector<Eigen::VectorXd>& vectors) {
  if (vectors.empty()) throw std::invalid_argument("curvatures need at least one vector");
  if (vectors.front().norm() == 0.0) throw std::domain_error("zero velocity: curvature undefined at a fixed point");
  const OrthoBasis basis = gram_schmidt(vectors);
  CurvatureSet out;
  out.degenerate_index = basis.degenerate_index;
  const double v = basis.u[0].norm();
  const int m = static_cast<int>(vectors.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i + 1 < m; ++i) {
    const double ui = basis.u[static_cast<std::size_t>(i)].norm();
    if (basis.degenerate_index && i >= *basis.degenerate_index) {
      out.kappa.push_back(nan);
      continue;
    }
    out.kappa.push_back(basis.u[static_cast<std::size_t>(i + 1)].norm() / (v * ui));
  }
  if (m == 3 && vectors.front().size() == 3 && (!basis.degenerate_index || *basis.degenerate_index > 1)) {
    out.torsion = torsion_3d(vectors[0], vectors[1], vectors[2]);
  }
  return out;
}

double curvature1_3d(const Eigen::Vector3d& V, const Eigen::Vector3d& gamma) {
  const double v = V.norm();
  if (v == 0.0) throw std::domain_error("zero velocity: curvature undefined at a fixed point");
  return gamma.cross(V).norm() / (v * v * v);
}

double torsion_3d(const Eigen::Vector3d& V, const Eigen::Vector3d& gamma, const Eigen::Vector3d& gamma_dot) {
  const Eigen::Vector3d gv = gamma.cross(V);
  const double nn = gv.squaredNorm();
  if (nn == 0.0 || gv.norm() <= kDegeneracyThreshold * gamma.norm() * V.norm())
    throw std::domain_error("vanishing curvature: torsion undefined");
  return -gamma_dot.dot(gv) / nn;
}

double identity_a10_residual(const Eigen::MatrixXd& stack) {
  if (stack.rows() != stack.cols()) throw std::invalid_argument("A.10 residual needs a square stack");
  std::vector<Eigen::VectorXd> cols;
  for (Eigen::Index c = 0; c < stack.cols(); ++c) cols.push_back(stack.col(c));
  const OrthoBasis basis = gram_schmidt(cols);
  double prod = 1.0;
  for (const auto& u : basis.u) prod *= u.norm();
  const double det = std::abs(stack.partialPivLu().determinant());
  return std::abs(det - prod) / std::max(1.0, prod);
}

namespace {
double relative(double lhs, double rhs, double scale) {
  const double s = std::max({std::abs(lhs), std::abs(rhs), scale});
  return s == 0.0 ? 0.0 : std::abs(lhs - rhs) / s;
}
}  // namespace

double identity_a15_residual(const Eigen::MatrixXd& J, const Eigen::MatrixXd& a) {
  if (J.rows() != J.cols() || a.rows() != J.rows() || a.cols() != J.cols())
    throw std::invalid_argument("A.15 residual needs square matrices of equal size");
  const double lhs = (J * a).partialPivLu().determinant();
  const double rhs = J.partialPivLu().determinant() * a.partialPivLu().determinant();
  return relative(lhs, rhs, 0.0);
}

double identity_a16_residual(const Eigen::MatrixXd& J, const Eigen::MatrixXd& a) {
  if (J.rows() != J.cols() || a.rows() != J.rows() || a.cols() != J.cols())
    throw std::invalid_argument("A.16 residual needs square matrices of equal size");
  double lhs = 0.0, magnitude = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    Eigen::MatrixXd m = a;
    m.col(k) = J * a.col(k);
    const double term = m.partialPivLu().determinant();
    lhs += term;
    magnitude += std::abs(term);
  }
  const double rhs = J.trace() * a.partialPivLu().determinant();
  return relative(lhs, rhs, magnitude);
}

}  // namespace flowcurv
