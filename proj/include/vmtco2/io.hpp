#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vmtco2::io {

/// A header-addressed CSV table. Cells are kept as trimmed strings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line of each row, for diagnostics.
  std::vector<int> lines;

  std::optional<std::size_t> column(std::string_view name) const;
  /// Index of a required column; throws InputError naming every missing column.
  std::vector<std::size_t> require(const std::vector<std::string>& names) const;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

/// Parses a full cell as a double; throws InputError with the location on failure.
double parse_double(std::string_view cell, std::string_view what, int line);
long long parse_int(std::string_view cell, std::string_view what, int line);

std::string trim(std::string_view s);

/// Six significant digits, locale independent ("%.6g").
std::string fmt(double v);
/// `v` rounded to six significant digits, for JSON output.
double round6(double v);

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file then renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

/// Plain-text `key = value` file. Blank lines and `#` comments are skipped;
/// any other line without `=` is an InputError naming the line.
struct KeyValueLine {
  std::string key;
  std::string value;
  int line = 0;
};
std::vector<KeyValueLine> parse_key_values(std::istream& in, std::string_view source);
std::vector<KeyValueLine> read_key_values(const std::filesystem::path& path);

}  // namespace vmtco2::io
