#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tankguard/common.hpp"

namespace tankguard {

// CSV writing/parsing used by every log artifact. Numeric cells are printed
// with fmt_double (%.17g) so a parse -> rewrite cycle is byte-identical;
// that property is what replay verification and the determinism checks rest on.

class CsvWriter {
 public:
  CsvWriter() = default;
  explicit CsvWriter(const std::string& path) { open(path); }

  void open(const std::string& path) {
    out_.open(path, std::ios::binary);  // binary: fixed "\n" endings everywhere
    require(out_.good(), "csv: cannot write " + path);
  }
  bool is_open() const { return out_.is_open(); }

  void comment(const std::string& text) { out_ << "# " << text << "\n"; }

  void header(const std::vector<std::string>& cols) { line(cols); }

  void line(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ",";
      out_ << cells[i];
    }
    out_ << "\n";
  }

  void close() {
    if (out_.is_open()) out_.close();
  }

 private:
  std::ofstream out_;
};

inline std::string cell(double v) { return fmt_double(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(long v) { return std::to_string(v); }
inline std::string cell(long long v) { return std::to_string(v); }
inline std::string cell(bool v) { return v ? "1" : "0"; }

struct CsvTable {
  std::vector<std::string> comments;  // leading '#' lines, without the marker
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("csv: no column named " + name);
  }
  double at(size_t row, const std::string& name) const { return rows.at(row).at(col(name)); }
};

// String-valued variant for tables whose cells are not all numeric
// (comparison tables carry run-config names) or whose integers exceed what a
// double can hold exactly (episode seeds).
struct CsvTextTable {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("csv: no column named " + name);
  }
  const std::string& at(size_t row, const std::string& name) const {
    return rows.at(row).at(col(name));
  }
};

inline CsvTextTable parse_csv_text(std::istream& in) {
  CsvTextTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (!have_header) {
      t.columns = cells;
      have_header = true;
      continue;
    }
    require(cells.size() == t.columns.size(), "csv: ragged row");
    t.rows.push_back(std::move(cells));
  }
  require(have_header, "csv: missing header");
  return t;
}

inline CsvTable parse_csv(std::istream& in) {
  CsvTextTable raw = parse_csv_text(in);
  CsvTable t;
  t.comments = std::move(raw.comments);
  t.columns = std::move(raw.columns);
  t.rows.reserve(raw.rows.size());
  for (const auto& cells : raw.rows) {
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& s : cells) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      require(end != s.c_str(), "csv: non-numeric cell '" + s + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CsvTextTable load_csv_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "csv: cannot open " + path);
  return parse_csv_text(in);
}

inline CsvTable load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "csv: cannot open " + path);
  return parse_csv(in);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tankguard
