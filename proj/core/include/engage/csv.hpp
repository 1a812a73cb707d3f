#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace engage::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, if present.
  std::optional<std::size_t> find(std::string_view name) const;
  // Same, but throws kSchema naming the column when absent.
  std::size_t require(std::string_view name) const;
};

// Comma-separated, header row first. Cells and header names are
// whitespace-trimmed (tool output often writes ", " separators); blank lines
// are skipped. Rows with a cell count different from the header are rejected.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text, const std::string& source = "<memory>");

// row_number is 1-based over data rows, used in the error message.
double parse_double(std::string_view cell, std::size_t row_number, std::string_view column);

// Shortest representation that round-trips to the same double.
std::string format_double(double value);
// Fixed significant digits, for bulky synthetic outputs.
std::string format_double(double value, int significant_digits);

std::string join(const std::vector<std::string>& cells);

// Writes to a sibling temporary then renames, so readers never observe a
// partially written file.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace engage::csv
