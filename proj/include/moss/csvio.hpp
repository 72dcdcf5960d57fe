#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "moss/errors.hpp"

namespace moss {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // raw fields, header excluded

  int column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    std::size_t b = f.find_first_not_of(" \t");
    std::size_t e = f.find_last_not_of(" \t");
    f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

// Plain comma-separated values, header required. Quoted fields are not
// supported; inputs here are numeric tables.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open file: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw data_error("empty file: " + path);
  table.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    table.rows.push_back(split_csv_line(line));
  }
  return table;
}

// Fixed numeric formatting so repeated runs emit byte-identical tables.
inline std::string fmt_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw data_error("cannot open file for writing: " + path);
  }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (j) out_ << ',';
      out_ << fields[j];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace moss
