#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace brainage::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or throws a schema error.
  std::size_t column(const std::string& name) const;
};

Table read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Table& table);

std::vector<std::string> split(const std::string& line, char sep = ',');

// Shortest decimal text that round-trips the double.
std::string format_double(double value);
double parse_double(const std::string& text);

}  // namespace brainage::csv
