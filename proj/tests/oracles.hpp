#pragma once

// Reference computations that share no code with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Determinant by the permutation (Leibniz) expansion.
inline long double leibniz_det(const Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>& m) {
  const int n = static_cast<int>(m.rows());
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  long double sum = 0;
  do {
    int inversions = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) inversions += p[static_cast<std::size_t>(i)] > p[static_cast<std::size_t>(j)];
    long double term = inversions % 2 ? -1.0L : 1.0L;
    for (int i = 0; i < n; ++i) term *= m(i, p[static_cast<std::size_t>(i)]);
    sum += term;
  } while (std::next_permutation(p.begin(), p.end()));
  return sum;
}

inline double leibniz_det(const Eigen::MatrixXd& m) { return static_cast<double>(leibniz_det(m.cast<long double>().eval())); }

using Field = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline Eigen::MatrixXd fd_jacobian(const Field& f, const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd J(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double s = h * (1.0 + std::abs(x[j]));
    Eigen::VectorXd a = x, b = x;
    a[j] += s;
    b[j] -= s;
    J.col(j) = (f(a) - f(b)) / (2 * s);
  }
  return J;
}

// Classical fixed-step Runge-Kutta.
inline Eigen::VectorXd rk4(const Field& f, Eigen::VectorXd x, double t_end, int steps) {
  const double h = t_end / steps;
  for (int i = 0; i < steps; ++i) {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
    const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
    const Eigen::VectorXd k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

}  // namespace oracle
