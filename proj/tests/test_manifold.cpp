#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "flowcurv/expression.hpp"
#include "flowcurv/manifold.hpp"
#include "flowcurv/models.hpp"
#include "oracles.hpp"

using namespace flowcurv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const char* kToy = R"j({"name": "toy", "dim": 2, "params": {"eps": 0.01, "k": "1/eps"},
                       "rhs": ["k*(x2 - x1)", "-x2"]})j";

}  // namespace

TEST_CASE("phi and its Lie derivative are the stack determinants") {
  const ModelDef m = make_builtin("chua5-cubic");
  const Eigen::VectorXd x{{0.3, -0.2, 0.1, 0.05, -0.1}};
  const auto st = derivative_stack_l(m, x, 6);
  MatrixX<long double> a(5, 5), b(5, 5);
  for (int k = 0; k < 5; ++k) {
    a.col(k) = st.d(k + 1);
    b.col(k) = st.d(k < 4 ? k + 1 : 6);
  }
  CHECK_THAT(phi(m, x), WithinRel(static_cast<double>(oracle::leibniz_det(a)), 1e-9));
  CHECK_THAT(lie_phi(m, x), WithinRel(static_cast<double>(oracle::leibniz_det(b)), 1e-9));
}

TEST_CASE("toy slow-fast system has phi = -z^2/eps on x = z") {
  const ModelDef m = load_model(kToy);
  CHECK_THAT(phi(m, Eigen::Vector2d(1.0, 1.0)), WithinRel(-100.0, 1e-12));
  CHECK_THAT(phi(m, Eigen::Vector2d(0.5, 0.5)), WithinRel(-25.0, 1e-12));
}

TEST_CASE("Darboux identity holds exactly for linear systems") {
  const ModelDef m = load_model(R"j({"name": "lin", "dim": 3,
      "rhs": ["-0.5*x1 + 2*x2", "-2*x1 - 0.5*x2 + x3", "0.3*x1 - 4*x3"]})j");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 200; ++k) {
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(3, [&] { return u(rng); });
    CHECK(darboux_residual(m, x) <= 1e-10);
  }
}

TEST_CASE("order-0 residual falls linearly with epsilon on the toy system") {
  const ModelDef m = load_model(kToy);
  SlowFastSplit split;
  split.fast_indices = {0};
  split.epsilon = 0.01;
  split.lo = Eigen::Vector2d(0.0, 0.5);
  split.hi = Eigen::Vector2d(0.0, 2.0);
  split.stiffness_param = "k";
  const auto prof = gsp_order0_profile(m, split, 50, {1.0, 10.0, 100.0});
  REQUIRE(prof.size() == 3);
  CHECK(prof[0].failures == 0);
  CHECK_THAT(prof[0].epsilon, WithinRel(0.01, 1e-12));
  CHECK_THAT(prof[1].epsilon, WithinRel(0.001, 1e-12));
  CHECK_THAT(prof[0].mean / prof[1].mean, WithinRel(10.0, 0.05));
  CHECK_THAT(prof[1].mean / prof[2].mean, WithinRel(10.0, 0.05));
  CHECK(gsp_order0_residual(m, split, 0).samples == 0);
  split.epsilon = 0;
  CHECK_THROWS_AS(gsp_order0_residual(m, split, 10), std::invalid_argument);
}

TEST_CASE("Chua 4-D cubic order-0 residual shrinks under stiffening") {
  const ModelDef m = make_builtin("chua4-cubic");
  SlowFastSplit split;
  split.fast_indices = {0};
  split.epsilon = 1.0 / 2.1429;
  split.lo = Eigen::Vector4d::Constant(-1.5);
  split.hi = Eigen::Vector4d::Constant(1.5);
  split.stiffness_param = "alpha1";
  const auto prof = gsp_order0_profile(m, split, 100, {1.0, 10.0, 100.0});
  CHECK(prof[1].mean < prof[0].mean);
  CHECK(prof[2].mean < prof[1].mean);
}

TEST_CASE("grid zero set of Chua 3-D follows the tangent plane") {
  const ModelDef m = make_builtin("chua3-pwl");
  GridSpec g;
  g.axes = {{0, 1.2, 3.0, 10}, {1, -1.0, 1.0, 10}, {2, -4.0, 0.0, 10}};
  g.base = Eigen::Vector3d::Zero();
  const ZeroSet zs = zero_set_grid(m, g, 2);
  std::size_t outer = 0;
  for (const auto& p : zs.points) {
    if (p.region->code != 1) continue;
    ++outer;
    const Eigen::VectorXd& x = p.point;
    CHECK(std::abs(2.8759 * x[0] - 3.9421 * x[1] + x[2] - 2.8139) <= 5e-3);
  }
  CHECK(outer > 10);
  const ZeroSet again = zero_set_grid(m, g, 1);
  REQUIRE(again.points.size() == zs.points.size());
  for (std::size_t i = 0; i < zs.points.size(); ++i) CHECK(again.points[i].point == zs.points[i].point);
}

TEST_CASE("grid zero sets are empty where phi keeps its sign") {
  // phi = -6 x1 x2 for x1' = -x1, x2' = -3 x2.
  const ModelDef m = load_model(R"j({"name": "decay", "dim": 2, "rhs": ["-x1", "-3*x2"]})j");
  GridSpec g;
  g.axes = {{0, 1.0, 2.0, 5}, {1, 1.0, 2.0, 5}};
  g.base = Eigen::Vector2d::Zero();
  CHECK(zero_set_grid(m, g).points.empty());
  g.axes[0] = {0, -1.0, 2.0, 4};
  const ZeroSet zs = zero_set_grid(m, g);
  REQUIRE_FALSE(zs.points.empty());
  for (const auto& p : zs.points) CHECK(std::abs(p.point[0]) <= 1e-9);
}

TEST_CASE("gear zero set clusters on its factors") {
  const ModelDef m = make_builtin("gear5");
  GridSpec g;
  g.axes = {{0, -1.1, 1.0, 9}, {1, -1.05, 1.0, 9}, {2, -0.5, 2.5, 9}};
  g.base = Eigen::VectorXd::Zero(5);
  const ZeroSet zs = zero_set_grid(m, g);
  REQUIRE_FALSE(zs.points.empty());
  for (const auto& p : zs.points) {
    const Eigen::VectorXd& x = p.point;
    const double r2 = x[0] * x[0] + x[1] * x[1];
    const bool paraboloid = std::abs(r2 - x[2]) <= 1e-6 * (1 + std::abs(x[2]));
    const bool axis = r2 <= 1e-6;
    CHECK((paraboloid || axis));
  }
}

TEST_CASE("trajectory crossings") {
  const ModelDef m = make_builtin("chua3-pwl");
  SECTION("a fixed point is degenerate") {
    const Trajectory t = integrate(m, Eigen::Vector3d(1.5, 0.0, -1.5), 1.0);
    const ZeroSet zs = zero_crossings_on_trajectory(m, t);
    CHECK(zs.degenerate);
    CHECK(zs.points.empty());
  }
  SECTION("chaotic crossings in the outer regions lie on the planes") {
    // The planes are invariant, so inside an outer region phi keeps its sign
    // and the only reported events are straddles of the breakpoints.
    const Trajectory t = integrate(m, Eigen::Vector3d(0.1, 0.0, 0.0), 500.0);
    REQUIRE(t.ok());
    const ZeroSet zs = zero_crossings_on_trajectory(m, t);
    std::size_t outer = 0;
    for (const auto& p : zs.points) {
      const int b = static_cast<int>(p.region->code);
      if (b == 0) continue;
      ++outer;
      const Eigen::VectorXd& x = p.point;
      CHECK(std::abs(2.8759 * x[0] - 3.9421 * x[1] + x[2] + b * -2.8139) <= 5e-3);
    }
    CHECK(outer == 0);
    CHECK_FALSE(zs.warnings.empty());
  }
  SECTION("a short sign-definite arc has no crossings") {
    const Trajectory t = integrate(m, Eigen::Vector3d(0.1, 0.0, 0.0), 0.01);
    const ZeroSet zs = zero_crossings_on_trajectory(m, t);
    CHECK(zs.points.empty());
    CHECK_FALSE(zs.degenerate);
  }
}

TEST_CASE("gear factors") {
  const ModelDef m = make_builtin("gear5");
  Box box{Eigen::VectorXd::Constant(5, -1.5), Eigen::VectorXd::Constant(5, 1.5)};
  box.hi[2] = 3.0;
  const FactorReport integral = factor_check(m, "x1^2 + x2^2", box, 100);
  CHECK(integral.verdict == FactorVerdict::FirstIntegral);
  for (double c : integral.cofactor) CHECK(std::abs(c) <= 1e-9);

  const FactorReport parab = factor_check(m, "x1^2 + x2^2 - x3", box, 100);
  CHECK(parab.verdict == FactorVerdict::Invariant);
  CHECK(parab.zero_points > 0);
  CHECK(parab.max_scaled_phi <= 1e-6);
  for (std::size_t i = 0; i < parab.basis.size(); ++i)
    CHECK_THAT(parab.cofactor[i], WithinAbs(parab.basis[i] == "1" ? -1000.0 : 0.0, 1e-6));

  const FactorReport quartic = factor_check(m, "x4^2 + beta1", box, 50);
  CHECK(quartic.zero_points == 0);
  CHECK(quartic.verdict == FactorVerdict::Invariant);

  CHECK_THROWS_AS(factor_check(m, "x1 - x1", box, 10), std::invalid_argument);
}

TEST_CASE("a non-invariant factor is reported as such") {
  const ModelDef m = make_builtin("chua3-pwl");
  Box box{Eigen::Vector3d::Constant(-2), Eigen::Vector3d::Constant(2)};
  const FactorReport r = factor_check(m, "x1", box, 100);
  CHECK(r.verdict == FactorVerdict::NotInvariant);
  CHECK(r.fit_residual > 1e-3);
}

TEST_CASE("threaded sampling is order-preserving") {
  const ModelDef m = make_builtin("chua5-pwl");
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<Eigen::VectorXd> pts;
  for (int k = 0; k < 64; ++k) pts.push_back(Eigen::VectorXd::NullaryExpr(5, [&] { return u(rng); }));
  const auto one = sample_points(m, pts, 1), four = sample_points(m, pts, 4);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(one[i].phi == four[i].phi);
    CHECK(one[i].lie == four[i].lie);
    CHECK(one[i].cofactor_residual <= 1e-8);
  }
}
