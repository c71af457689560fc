#pragma once

#include <string>
#include <vector>

namespace par {

// Minimal CSV table: header row plus string cells. Quoted fields with embedded
// commas/quotes are supported; surrounding whitespace of unquoted cells is trimmed.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  size_t nrows() const { return rows.size(); }
  size_t ncols() const { return columns.size(); }
  // -1 when the column is absent.
  int col_index(const std::string& name) const;
};

Table read_csv_text(const std::string& text);
Table read_csv(const std::string& path);
void write_csv(const Table& t, const std::string& path);

}  // namespace par
