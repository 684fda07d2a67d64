#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "flowcurv/table.hpp"

using namespace flowcurv;

TEST_CASE("shortest decimal text round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 100.0 / 7.0, 0.0}) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e21) == "1e+21");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(format_double(-0.0) == "0");
}

TEST_CASE("csv and json writers") {
  Table t;
  t.columns = {"x1", "note"};
  t.add_row({0.5, std::string("a,b")});
  t.add_row({std::nan(""), std::int64_t{-1}});
  CHECK_THROWS_AS(t.add_row({1.0}), std::invalid_argument);
  std::ostringstream csv, json;
  write_csv(csv, t);
  CHECK(csv.str() == "x1,note\n0.5,\"a,b\"\nnan,-1\n");
  write_json(json, t);
  CHECK(json.str() == "{\"columns\":[\"x1\",\"note\"],\"rows\":[[0.5,\"a,b\"],[null,-1]]}\n");
}
