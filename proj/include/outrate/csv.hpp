#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace outrate::csv {

using Row = std::vector<std::string>;

// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
Row split_line(std::string_view line);

struct Table {
  Row header;
  std::vector<Row> rows;
  // Column position by name, or -1.
  int column(std::string_view name) const;
};

// Reads a whole CSV stream. Blank lines are skipped; a trailing '\r' is
// stripped. An empty stream yields an empty header.
Table read(std::istream& in);

std::string quote(std::string_view field);
void write_row(std::ostream& out, const Row& row);

// Shortest round-trip decimal form of a double.
std::string format_double(double value);

std::string trim(std::string_view s);

}  // namespace outrate::csv
