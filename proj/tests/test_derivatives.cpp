#include <catch_amalgamated.hpp>

#include <cmath>

#include "flowcurv/derivatives.hpp"
#include "flowcurv/expression.hpp"
#include "flowcurv/models.hpp"
#include "oracles.hpp"

using namespace flowcurv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("jet products truncate at the lower order") {
  const JetD a = JetD::variable(2.0, 1.0, 3);  // 2 + t
  const JetD b = JetD::variable(1.0, -1.0, 5);  // 1 - t
  const JetD c = a * b;                          // 2 - t - t^2
  CHECK(c.order() == 3);
  CHECK(c[0] == 2.0);
  CHECK(c[1] == -1.0);
  CHECK(c[2] == -1.0);
  CHECK(c[3] == 0.0);
  const JetD p = pow(a, 3);  // 8 + 12t + 6t^2 + t^3
  CHECK(p[0] == 8.0);
  CHECK(p[1] == 12.0);
  CHECK(p[2] == 6.0);
  CHECK(p[3] == 1.0);
  CHECK_THROWS_AS(pow(a, -1), std::invalid_argument);
  CHECK_THROWS(JetD::constant(1.0, kJetMaxOrder + 1));
}

TEST_CASE("derivative stack of a field with closed-form derivatives") {
  // x1' = x1^2 has x1^(k) = k! x1^(k+1); x2' = -x2 has x2^(k) = (-1)^k x2.
  const ModelDef m = load_model(R"j({"name": "closed", "dim": 2, "rhs": ["x1^2", "-x2"]})j");
  const Eigen::VectorXd x{{0.7, 1.3}};
  const auto st = derivative_stack<long double>(m, x.cast<long double>(), 8);
  long double fact = 1;
  for (int k = 1; k <= 8; ++k) {
    fact *= k;
    const long double want1 = fact * std::pow(0.7L, k + 1);
    CHECK_THAT(static_cast<double>(st.d(k)[0]), WithinRel(static_cast<double>(want1), 1e-15));
    CHECK(static_cast<double>(st.d(k)[1]) == (k % 2 ? -1.3 : 1.3));
  }
}

TEST_CASE("piecewise-linear stacks follow the Jacobian recurrence") {
  const ModelDef m = make_builtin("chua4-pwl");
  const Eigen::VectorXd x{{1.7, -0.2, 0.4, 0.9}};
  const auto region = m.region_of(x);
  const Eigen::MatrixXd J = oracle::fd_jacobian([&](const Eigen::VectorXd& y) { return m.rhs(y, region); }, x);
  const auto st = derivative_stack<double>(m, x, 5);
  for (int k = 1; k < 5; ++k) {
    const Eigen::VectorXd next = J * st.d(k);
    CHECK((st.d(k + 1) - next).norm() <= 1e-8 * st.d(k + 1).norm());
  }
  CHECK((st.d(1) - m.rhs(x)).norm() == 0.0);
}

TEST_CASE("derivative stack rejects bad requests") {
  const ModelDef m = make_builtin("chua3-pwl");
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.2);
  CHECK_THROWS_AS(derivative_stack<double>(m, x, 0), std::invalid_argument);
  CHECK_THROWS_AS(derivative_stack<double>(m, x, 16), std::invalid_argument);
  CHECK_THROWS_AS(derivative_stack<double>(m, Eigen::VectorXd::Zero(2), 3), std::invalid_argument);
  Eigen::VectorXd bad = x;
  bad[1] = std::nan("");
  CHECK_THROWS_AS(derivative_stack<double>(m, bad, 3), std::invalid_argument);
}

TEST_CASE("stack at a fixed point is zero") {
  const ModelDef m = make_builtin("chua3-pwl");
  const auto st = derivative_stack_l(m, Eigen::Vector3d(1.5, 0.0, -1.5), 4);
  for (int k = 1; k <= 4; ++k) CHECK(st.d(k).norm() <= 1e-14L);
}
