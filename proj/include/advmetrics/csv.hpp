#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "advmetrics/error.hpp"

namespace advmetrics::csv {

/// Shortest decimal representation that round-trips the exact double.
std::string format_double(double value);

double parse_double(std::string_view text);
int parse_int(std::string_view text);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position of `name`; throws ParseError when absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

/// RFC-4180-style reader: comma separated, double quotes for fields that
/// contain commas, quotes, or newlines. First record is the header.
Table read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, const Table& table);

}  // namespace advmetrics::csv
