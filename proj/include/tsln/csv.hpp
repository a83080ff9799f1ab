#ifndef TSLN_CSV_HPP
#define TSLN_CSV_HPP

#include <string>
#include <vector>

namespace tsln::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;        // -1 if absent
  int require_column(const std::string& name) const;  // throws if absent
};

Table read_file(const std::string& path);
Table parse(const std::string& text);

double to_double(const std::string& cell);
long to_long(const std::string& cell);

void write_file(const std::string& path, const Table& t);

}  // namespace tsln::csv

#endif
