#include <catch_amalgamated.hpp>

#include <random>

#include "flowcurv/geometry.hpp"
#include "oracles.hpp"

using namespace flowcurv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("helix stack has torsion one half") {
  const Eigen::Vector3d V(0, 1, 1), g(-1, 0, 0), gd(0, -1, 0);
  CHECK_THAT(std::abs(torsion_3d(V, g, gd)), WithinAbs(0.5, 1e-15));
  CHECK_THAT(curvature1_3d(V, g), WithinAbs(0.5, 1e-15));
  const CurvatureSet c = curvatures({Eigen::VectorXd(V), Eigen::VectorXd(g), Eigen::VectorXd(gd)});
  CHECK_THAT(c.kappa[1], WithinAbs(0.5, 1e-15));
  REQUIRE(c.torsion);
  CHECK_THAT(std::abs(*c.torsion), WithinAbs(0.5, 1e-15));
}

TEST_CASE("gram-schmidt basis is orthogonal and reproduces the inputs") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::vector<Eigen::VectorXd> v;
  for (int i = 0; i < 4; ++i) v.push_back(Eigen::VectorXd::NullaryExpr(5, [&] { return g(rng); }));
  const OrthoBasis b = gram_schmidt(v);
  CHECK_FALSE(b.degenerate());
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < i; ++j) CHECK(std::abs(b.u[i].dot(b.u[j])) <= 1e-12 * b.u[i].norm() * b.u[j].norm());
    Eigen::VectorXd back = Eigen::VectorXd::Zero(5);
    for (int j = 0; j <= i; ++j) back += b.beta(i, j) * b.u[j];
    CHECK((back - v[i]).norm() <= 1e-12 * v[i].norm());
    CHECK(b.beta(i, i) == 1.0);
  }
  CHECK_THROWS_AS(gram_schmidt(std::vector<Eigen::VectorXd>(6, Eigen::VectorXd::Ones(5))), std::invalid_argument);
}

TEST_CASE("collinear stacks are flagged degenerate") {
  const Eigen::VectorXd a{{1.0, 2.0, 0.5}};
  const CurvatureSet c = curvatures({a, 3.0 * a, Eigen::VectorXd{{0.0, 1.0, 0.0}}});
  REQUIRE(c.degenerate_index);
  CHECK(*c.degenerate_index == 1);
  CHECK(c.kappa[0] == 0.0);
  CHECK(std::isnan(c.kappa[1]));
  CHECK_THROWS_AS(curvatures({Eigen::VectorXd::Zero(3), a, a}), std::domain_error);
  CHECK_THROWS_AS(torsion_3d(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(2, 0, 0), Eigen::Vector3d(0, 1, 0)),
                  std::domain_error);
}

TEST_CASE("determinant identities on random matrices") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int n : {3, 4, 5}) {
    for (int k = 0; k < 50; ++k) {
      const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
      const Eigen::MatrixXd J = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
      CHECK(identity_a10_residual(a) <= 1e-10);
      CHECK(identity_a15_residual(J, a) <= 1e-10);
      CHECK(identity_a16_residual(J, a) <= 1e-10);
      // Gram-Schmidt norms against the permutation expansion.
      std::vector<Eigen::VectorXd> cols;
      for (int c = 0; c < n; ++c) cols.push_back(a.col(c));
      const OrthoBasis b = gram_schmidt(cols);
      double prod = 1;
      for (const auto& u : b.u) prod *= u.norm();
      CHECK_THAT(prod, WithinRel(std::abs(oracle::leibniz_det(a)), 1e-10));
    }
  }
}

TEST_CASE("wedge realizes the determinant against any vector") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int n : {2, 3, 4, 5}) {
    const Eigen::MatrixXd B = Eigen::MatrixXd::NullaryExpr(n, n - 1, [&] { return g(rng); });
    const Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
    Eigen::MatrixXd full(n, n);
    full << v, B;
    const Eigen::VectorXd w = wedge<double>(B);
    CHECK_THAT(v.dot(w), WithinAbs(oracle::leibniz_det(full), 1e-12));
    for (int c = 0; c < n - 1; ++c) CHECK(std::abs(B.col(c).dot(w)) <= 1e-12 * w.norm() * B.col(c).norm());
  }
  CHECK_THROWS_AS(wedge<double>(Eigen::MatrixXd::Zero(3, 3)), std::invalid_argument);
}

TEST_CASE("second curvature equals the absolute torsion on random 3-D stacks") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector3d V = Eigen::Vector3d::NullaryExpr([&] { return g(rng); });
    const Eigen::Vector3d a = Eigen::Vector3d::NullaryExpr([&] { return g(rng); });
    const Eigen::Vector3d b = Eigen::Vector3d::NullaryExpr([&] { return g(rng); });
    const CurvatureSet c = curvatures({Eigen::VectorXd(V), Eigen::VectorXd(a), Eigen::VectorXd(b)});
    CHECK_THAT(c.kappa[0], WithinRel(curvature1_3d(V, a), 1e-10));
    CHECK_THAT(c.kappa[1], WithinRel(std::abs(torsion_3d(V, a, b)), 1e-10));
  }
}
