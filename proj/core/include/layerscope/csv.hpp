#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace layerscope {

std::vector<std::string> split(std::string_view text, char sep);

// Shortest representation that round-trips through strtod; "nan" for NaN.
std::string format_number(double v);

// Parses a finite or "nan" number; throws Error(core-io, malformed-row) otherwise.
double parse_double(std::string_view field);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of `name` in the header; throws Error(core-io, missing-column).
  std::size_t column(std::string_view name) const;
  std::vector<double> numeric_column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

}  // namespace layerscope
