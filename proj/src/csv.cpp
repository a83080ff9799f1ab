#include "tsln/csv.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tsln::csv {

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int Table::require_column(const std::string& name) const {
  int c = column(name);
  if (c < 0) throw std::runtime_error("missing column: " + name);
  return c;
}

static std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

Table parse(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      if (cells.size() != t.header.size())
        throw std::runtime_error("ragged csv row: " + line);
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw std::runtime_error("empty csv");
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

double to_double(const std::string& cell) {
  if (cell.empty()) throw std::runtime_error("empty numeric cell");
  std::size_t pos = 0;
  double v = std::stod(cell, &pos);
  if (pos != cell.size()) throw std::runtime_error("bad numeric cell: " + cell);
  return v;
}

long to_long(const std::string& cell) {
  if (cell.empty()) throw std::runtime_error("empty integer cell");
  std::size_t pos = 0;
  long v = std::stol(cell, &pos);
  if (pos != cell.size()) throw std::runtime_error("bad integer cell: " + cell);
  return v;
}

void write_file(const std::string& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < t.header.size(); ++i)
    out << t.header[i] << (i + 1 == t.header.size() ? '\n' : ',');
  for (const auto& row : t.rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 == row.size() ? '\n' : ',');
}

}  // namespace tsln::csv
