#include <catch_amalgamated.hpp>

#include <cmath>

#include "flowcurv/expression.hpp"
#include "flowcurv/integrate.hpp"
#include "flowcurv/models.hpp"
#include "oracles.hpp"

using namespace flowcurv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("linear decay matches the exponential") {
  const ModelDef m = load_model(R"j({"name": "decay", "dim": 2, "rhs": ["-x1", "-3*x2"]})j");
  const Trajectory t = integrate(m, Eigen::Vector2d(1.0, 2.0), 2.0);
  REQUIRE(t.ok());
  CHECK(t.times.front() == 0.0);
  CHECK(t.times.back() == 2.0);
  CHECK_THAT(t.states.back()[0], WithinRel(std::exp(-2.0), 1e-8));
  CHECK_THAT(t.states.back()[1], WithinRel(2 * std::exp(-6.0), 1e-8));
  CHECK_THROWS_AS(integrate(m, Eigen::Vector2d(1, 1), 0.0), std::invalid_argument);
  IntegrateOptions bad;
  bad.rel_tol = 0;
  CHECK_THROWS_AS(integrate(m, Eigen::Vector2d(1, 1), 1.0, bad), std::invalid_argument);
}

TEST_CASE("Chua 3-D agrees with a fine fixed-step reference") {
  const ModelDef m = make_builtin("chua3-pwl");
  const Eigen::Vector3d x0(0.1, 0.0, 0.0);
  IntegrateOptions opt;
  opt.rel_tol = 1e-11;
  opt.abs_tol = 1e-13;
  const Eigen::VectorXd got = advance(m, x0, 5.0, opt);
  const Eigen::VectorXd ref = oracle::rk4([&](const Eigen::VectorXd& x) { return m.rhs(x); }, x0, 5.0, 200000);
  CHECK((got - ref).norm() <= 1e-6);
}

TEST_CASE("breakpoint crossings are recorded as events") {
  const ModelDef m = make_builtin("chua3-pwl");
  const Trajectory t = integrate(m, Eigen::Vector3d(0.1, 0.0, 0.0), 30.0);
  REQUIRE(t.ok());
  REQUIRE_FALSE(t.events.empty());
  for (const auto& e : t.events) {
    CHECK(std::abs(e.from_branch - e.to_branch) == 1);
    CHECK(e.from != e.to);
  }
  // Every stored region matches the state it starts from, up to breakpoint ties.
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double u = t.states[i][0];
    if (std::abs(std::abs(u) - 1.0) > 1e-9) CHECK(t.regions[i] == m.region_of(t.states[i]));
  }
}

TEST_CASE("advance runs both ways") {
  const ModelDef m = make_builtin("chua4-cubic");
  const Eigen::Vector4d x0(0.3, -0.1, 0.2, 0.05);
  IntegrateOptions opt;
  opt.rel_tol = 1e-12;
  opt.abs_tol = 1e-14;
  const Eigen::VectorXd back = advance(m, advance(m, x0, 0.7, opt), -0.7, opt);
  CHECK((back - x0).norm() <= 1e-9);
  CHECK((advance(m, x0, 0.0, opt) - x0).norm() == 0.0);
}

TEST_CASE("gear trajectory keeps x1^2 + x2^2 and stops at blow-up") {
  const ModelDef m = make_builtin("gear5");
  IntegrateOptions opt;
  opt.rel_tol = 1e-11;
  const Trajectory t = integrate(m, Eigen::VectorXd{{1.0, 0.0, 0.5, 0.0, 0.0}}, 0.05, opt);
  REQUIRE(t.ok());
  for (const auto& x : t.states) CHECK_THAT(x[0] * x[0] + x[1] * x[1], WithinAbs(1.0, 1e-9));
  const Trajectory blow = integrate(m, Eigen::VectorXd{{1.0, 0.0, 0.5, 0.0, 0.0}}, 0.1);
  CHECK_FALSE(blow.ok());
  CHECK(blow.times.back() < 0.0556);
  CHECK_THROWS_AS(advance(m, Eigen::VectorXd{{1.0, 0.0, 0.5, 0.0, 0.0}}, 0.1), NumericalError);
}
