#include "par/csv.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "par/numeric.hpp"

namespace par {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool needs_quoting(const std::string& s) {
  if (s.find_first_of(",\"\n") != std::string::npos) return true;
  return !s.empty() && (std::isspace(static_cast<unsigned char>(s.front())) ||
                        std::isspace(static_cast<unsigned char>(s.back())));
}

}  // namespace

int Table::col_index(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

Table read_csv_text(const std::string& text) {
  Table t;
  std::vector<std::string> cells;
  std::string cell;
  bool in_quotes = false;
  bool was_quoted = false;
  size_t lineno = 1;

  auto end_cell = [&] {
    cells.push_back(was_quoted ? cell : trim(cell));
    cell.clear();
    was_quoted = false;
  };
  auto end_record = [&] {
    end_cell();
    bool blank = cells.size() == 1 && cells[0].empty();
    if (!blank) {
      if (t.columns.empty()) {
        t.columns = std::move(cells);
      } else {
        require(cells.size() == t.columns.size(),
                "csv: row ending at line " + std::to_string(lineno) + " has " +
                    std::to_string(cells.size()) + " cells, expected " +
                    std::to_string(t.columns.size()));
        t.rows.push_back(std::move(cells));
      }
    }
    cells.clear();
  };

  for (size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++lineno;
        cell += ch;
      }
    } else if (ch == '"' && !was_quoted && trim(cell).empty()) {
      in_quotes = true;
      was_quoted = true;
      cell.clear();
    } else if (ch == ',') {
      end_cell();
    } else if (ch == '\n') {
      if (!cells.empty() || was_quoted || !trim(cell).empty()) end_record();
      else cell.clear();
      ++lineno;
    } else if (ch != '\r') {
      cell += ch;
    }
  }
  require(!in_quotes, "csv: unterminated quoted field");
  if (!cells.empty() || was_quoted || !trim(cell).empty()) end_record();
  require(!t.columns.empty(), "csv: missing header row");
  return t;
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "csv: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_csv_text(ss.str());
}

void write_csv(const Table& t, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "csv: cannot write " + path);
  auto emit_row = [&out](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      if (needs_quoting(cells[i])) {
        out << '"';
        for (char ch : cells[i]) {
          if (ch == '"') out << "\"\"";
          else out << ch;
        }
        out << '"';
      } else {
        out << cells[i];
      }
    }
    out << '\n';
  };
  emit_row(t.columns);
  for (const auto& r : t.rows) emit_row(r);
}

}  // namespace par
