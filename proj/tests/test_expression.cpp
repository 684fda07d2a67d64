#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "flowcurv/expression.hpp"
#include "flowcurv/models.hpp"

using namespace flowcurv;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

std::string error_of(const std::string& json) {
  try {
    load_model(json);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("constant expressions") {
  CHECK(parse_constant("100/7", {}) == 100.0L / 7.0L);
  CHECK(parse_constant("-(2 + 3)*4", {}) == -20.0L);
  CHECK(parse_constant("2^10", {}) == 1024.0L);
  CHECK(parse_constant("a*b", {{"a", 3.0L}, {"b", 0.5L}}) == 1.5L);
  CHECK_THROWS_AS(parse_constant("1/0", {}), ConfigError);
  CHECK_THROWS_AS(parse_constant("x1 + 1", {}), ConfigError);
  CHECK_THROWS_WITH(parse_constant("2 + foo", {}), ContainsSubstring("column 5"));
}

TEST_CASE("expressions differentiate symbolically") {
  const ExprPtr e = parse_expression("x1^3 - 2*x1*x2 + 5", 2, {});
  const ExprPtr d1 = differentiate(e, 0);
  const ExprPtr d2 = differentiate(e, 1);
  const Eigen::VectorXd x{{1.5, -0.5}};
  CHECK_THAT(evaluate<double>(*e, x, {}), WithinAbs(3.375 + 1.5 + 5, 1e-14));
  CHECK_THAT(evaluate<double>(*d1, x, {}), WithinAbs(3 * 2.25 + 1.0, 1e-14));
  CHECK_THAT(evaluate<double>(*d2, x, {}), WithinAbs(-3.0, 1e-14));
  CHECK_THROWS_AS(parse_expression("x3", 2, {}), ConfigError);
  CHECK_THROWS_AS(parse_expression("x1 / x2", 2, {}), ConfigError);
  CHECK_THROWS_AS(parse_expression("x1^-1", 2, {}), ConfigError);
}

TEST_CASE("a config model reproduces the built-in Chua 3-D field") {
  const ModelDef cfg = load_model_file(std::filesystem::path(FLOWCURV_MODELS_DIR) / "chua3-pwl.json");
  const ModelDef ref = make_builtin("chua3-pwl");
  REQUIRE(cfg.dim() == 3);
  REQUIRE(cfg.piecewise());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(3, [&] { return u(rng); });
    CHECK((cfg.rhs(x) - ref.rhs(x)).norm() <= 1e-13 * (1 + ref.rhs(x).norm()));
    CHECK((cfg.jacobian(x) - ref.jacobian(x)).norm() <= 1e-13 * ref.jacobian(x).norm());
    CHECK(cfg.region_of(x) == ref.region_of(x));
  }
  const auto a = fixed_points(cfg), b = fixed_points(ref);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i].location - b[i].location).norm() <= 1e-12);
}

TEST_CASE("parameters defined from other parameters follow overrides") {
  const std::string json = R"j({"name": "toy", "dim": 2, "params": {"eps": 0.01, "k": "1/eps"},
                               "rhs": ["k*(x2 - x1)", "-x2"]})j";
  const ModelDef m = load_model(json);
  CHECK(m.params().at("k") == 1.0L / 0.01L);
  const ModelDef stiff = m.with_params({{"eps", 0.001L}});
  CHECK(stiff.params().at("k") == 1.0L / 0.001L);
  CHECK_THAT(stiff.rhs(Eigen::Vector2d(0.0, 1.0))[0], WithinAbs(1000.0, 1e-9));
  CHECK_THROWS_AS(load_model(json, {{"nope", 1.0L}}), ConfigError);
}

TEST_CASE("config errors carry locations") {
  CHECK_THAT(error_of(R"j({"name": "m", "dim": 2, "rhs": ["x1"]})j"), ContainsSubstring("dimension mismatch"));
  CHECK_THAT(error_of(R"j({"name": "m", "dim": 1, "rhs": ["x1 +* 2"]})j"), ContainsSubstring("column"));
  CHECK_THAT(error_of("{\"name\": \"m\",\n \"dim\": 1,\n \"rhs\": [\"x1\",]}"), ContainsSubstring("line 3"));
  CHECK_THAT(error_of(R"j({"name": "m", "dim": 1, "rhs": ["y"]})j"), ContainsSubstring("y"));
  CHECK_THAT(error_of(R"j({"name": "m", "dim": 1, "rhs": ["x1"], "extra": 1})j"), ContainsSubstring("extra"));
  CHECK_THAT(error_of(R"j({"name": "m", "dim": 1, "params": {"x1": 2}, "rhs": ["x1"]})j"),
             ContainsSubstring("reserved"));
  CHECK_THROWS_AS(load_model_file("/nonexistent/model.json"), ConfigError);
}

TEST_CASE("pwl terms each get a region digit") {
  const ModelDef m = load_model(R"j({"name": "two", "dim": 2,
      "rhs": ["pwl(x1; 1, 2)", "pwl(x2 - x1, -1, 3)"]})j");
  CHECK(m.field().pwl_terms() == 2);
  const auto r = m.region_of(Eigen::Vector2d(2.0, 0.5));
  CHECK(decode_region(*r, 2) == std::vector<int>{1, -1});
  CHECK_THAT(m.rhs(Eigen::Vector2d(2.0, 0.5))[0], WithinAbs(2 * 2.0 + 1 - 2, 1e-15));
  CHECK_THAT(m.rhs(Eigen::Vector2d(2.0, 0.5))[1], WithinAbs(3 * -1.5 + 3 - (-1), 1e-15));
}
