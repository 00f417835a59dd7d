#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace optlab {
namespace csv {

// shortest decimal string that parses back to exactly the same double
std::string format_double(double x);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // index of a named column; throws IoError when absent
  std::size_t col(const std::string& name) const;
  double num(std::size_t row, std::size_t col) const;
  std::size_t size() const { return rows.size(); }
};

Table read_file(const std::string& path);
Table parse(const std::string& text);

class Writer {
public:
  explicit Writer(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  std::string str() const;
  void save(const std::string& path) const;

private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace csv
}  // namespace optlab
