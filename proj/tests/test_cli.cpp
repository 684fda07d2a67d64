#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowcurv/cli.hpp"

using namespace flowcurv;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "flowcurv");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("list-models prints the registry") {
  const Result r = run({"list-models"});
  CHECK(r.code == 0);
  CHECK(r.out ==
        "chua3-pwl\nchua4-pwl\nchua5-pwl\nchua4-cubic\nchua5-cubic\nmagnetoconvection5\ngear5\n");
}

TEST_CASE("hyperplane prints the Chua 3-D planes") {
  const Result r = run({"hyperplane", "--model", "chua3-pwl"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("2.876x1 - 3.94213x2 + x3 + 2.81399 = 0"));
  CHECK_THAT(r.out, ContainsSubstring("2.876x1 - 3.94213x2 + x3 - 2.81399 = 0"));
  CHECK_THAT(r.out, ContainsSubstring("lambda = -3.94213"));
  const Result strict = run({"hyperplane", "-m", "chua5-pwl", "--policy", "strict"});
  CHECK(strict.code == 2);
  CHECK_THAT(strict.err, ContainsSubstring("complex"));
}

TEST_CASE("configuration errors exit with status 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"integrate"}).code == 1);
  CHECK(run({"integrate", "-m", "nosuch"}).code == 1);
  CHECK(run({"integrate", "-m", "chua3-pwl", "--x0", "1,2"}).code == 1);
  CHECK(run({"integrate", "-m", "chua3-pwl", "--t-end", "-1"}).code == 1);
  CHECK(run({"integrate", "-m", "chua3-pwl", "-p", "gamma=2"}).code == 1);
  CHECK(run({"manifold", "-m", "chua3-pwl", "--grid", "x1=0:1:1,x2=0:1:3"}).code == 1);
  CHECK(run({"manifold", "-m", "chua3-pwl", "--grid", "x1=0:1:5,x1=0:1:3"}).code == 1);
  CHECK(run({"manifold", "-m", "chua3-pwl", "--grid", "x1=0:1:5,x9=0:1:3"}).code == 1);
  CHECK(run({"manifold", "-m", "chua3-pwl", "--grid", "x1=0:1:5"}).code == 1);
  CHECK(run({"integrate", "-m", "chua3-pwl", "--format", "xml"}).code == 1);
  const Result r = run({"manifold", "-m", "chua3-pwl", "--grid", "x1=0:1:5,x2=a:1:3"});
  CHECK(r.code == 1);
  CHECK_THAT(r.err, ContainsSubstring("--grid"));
}

TEST_CASE("numerical failures exit with status 2 and leave no output file") {
  const fs::path out = fs::temp_directory_path() / "flowcurv_failure.csv";
  fs::remove(out);
  const Result r = run({"verify", "-m", "magnetoconvection5", "-o", out.string()});
  CHECK(r.code == 2);
  CHECK(fs::exists(out));  // the failing report itself is complete
  fs::remove(out);
  const Result blow = run({"integrate", "-m", "gear5", "--t-end", "0.1", "-o", out.string()});
  CHECK(blow.code == 2);
  CHECK_THAT(blow.err, ContainsSubstring("integration stopped"));
  CHECK_FALSE(fs::exists(out));
  CHECK_FALSE(fs::exists(out.string() + ".tmp"));
  CHECK(run({"hyperplane", "-m", "gear5"}).code == 2);
}

TEST_CASE("outputs are deterministic and independent of the worker count") {
  const fs::path dir = fs::temp_directory_path();
  const fs::path a = dir / "flowcurv_a.csv", b = dir / "flowcurv_b.csv";
  const std::vector<std::string> base{"manifold", "-m", "chua4-pwl", "--grid", "x1=-3:3:25,x2=-1:1:25,x3=-3:3:25",
                                      "--slice", "x4=fp"};
  auto with = [&](const fs::path& p, const char* threads) {
    auto v = base;
    v.insert(v.end(), {"-o", p.string(), "--threads", threads});
    return run(v);
  };
  REQUIRE(with(a, "1").code == 0);
  REQUIRE(with(b, "3").code == 0);
  const std::string text = slurp(a);
  CHECK(text == slurp(b));
  CHECK(text.rfind("x1,x2,x3,x4,phi,region\n", 0) == 0);
  CHECK(text.find('\r') == std::string::npos);
  CHECK_FALSE(fs::exists(a.string() + ".tmp"));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("integrate, phi-scan and curvature write their columns") {
  const Result t = run({"integrate", "-m", "chua3-pwl", "--t-end", "1"});
  REQUIRE(t.code == 0);
  CHECK(t.out.rfind("t,x1,x2,x3,region\n0,0.1,0,0,0\n", 0) == 0);

  const Result s = run({"phi-scan", "-m", "chua3-pwl", "--grid", "x1=0:1:2,x2=0:1:2", "--slice", "x3=0.5"});
  REQUIRE(s.code == 0);
  CHECK(s.out.rfind("x1,x2,x3,phi,lie,cofactor_residual\n0,0,0.5,", 0) == 0);

  const Result c = run({"curvature", "-m", "chua3-pwl", "--t-end", "1"});
  REQUIRE(c.code == 0);
  CHECK(c.out.rfind("t,kappa1,kappa2,torsion\n", 0) == 0);

  const Result j = run({"integrate", "-m", "chua3-pwl", "--t-end", "0.1", "--format", "json"});
  REQUIRE(j.code == 0);
  CHECK(j.out.rfind("{\"columns\":[\"t\",\"x1\",\"x2\",\"x3\",\"region\"],\"rows\":[[0.0,0.1,0.0,0.0,0]", 0) == 0);
}

TEST_CASE("verify reports the gear suite") {
  const Result r = run({"verify", "-m", "gear5"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("first integral"));
  CHECK_THAT(r.out, ContainsSubstring("product cofactor"));
  CHECK_THAT(r.out, ContainsSubstring("all checks passed"));
}

TEST_CASE("model files are accepted in place of registry names") {
  const Result r = run({"hyperplane", "-m", std::string(FLOWCURV_MODELS_DIR) + "/chua3-pwl.json"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("2.876x1 - 3.94213x2 + x3 + 2.81399 = 0"));
}

TEST_CASE("thread requests are capped by the environment") {
  setenv("FLOWCURV_THREADS", "2", 1);
  CHECK(cli::effective_threads(8) == 2);
  CHECK(cli::effective_threads(1) == 1);
  unsetenv("FLOWCURV_THREADS");
  CHECK(cli::effective_threads(8) == 8);
}
