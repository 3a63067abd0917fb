#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dot::csv {

/// One data row with its 1-based line number in the source file.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct Table {
  std::string source;  // file name used in error messages
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Column index by name, or -1.
  int column(std::string_view name) const;
};

/// Reads a comma-separated file with a mandatory header line. Blank lines are
/// skipped; fields are trimmed. Throws ValidationError on I/O problems or a
/// row whose field count differs from the header.
Table read(const std::string& path);
Table parse(std::string_view text, const std::string& source);

/// Header must start with `required` in order, optionally followed by any of
/// `optional` (also in order). Throws ValidationError otherwise.
void expect_header(const Table& t, const std::vector<std::string>& required,
                   const std::vector<std::string>& optional = {});

double to_double(const Table& t, const Row& r, std::size_t col);
std::int64_t to_int(const Table& t, const Row& r, std::size_t col);

/// Shortest text that reads back to the same double.
std::string format_exact(double v);
/// Fixed-point with `decimals` digits.
std::string format_fixed(double v, int decimals);

}  // namespace dot::csv
