#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace flowcurv {

/// Empty, real, integer or text cell.
using Cell = std::variant<std::monostate, double, std::int64_t, std::string>;

/// Column-labelled rows, written as CSV or as a JSON mirror.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Header line then one line per row, comma separated, '\n' terminated.
void write_csv(std::ostream& out, const Table& table);

/// {"columns": [...], "rows": [[...], ...]}; non-finite reals become null.
void write_json(std::ostream& out, const Table& table);

}  // namespace flowcurv
