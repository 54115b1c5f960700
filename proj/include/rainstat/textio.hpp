#pragma once

// Small helpers shared by the CSV and key=value readers.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace rainstat::textio {

std::string_view trim(std::string_view s) noexcept;

/// Splits on commas and trims each field. No quoting support.
std::vector<std::string_view> split_csv(std::string_view line);

/// Whole-token numeric parsing; these throw ParseError(source, line, ...).
double to_double(std::string_view tok, const std::string& source, std::size_t line,
                 std::string_view field);
long long to_int(std::string_view tok, const std::string& source, std::size_t line,
                 std::string_view field);

/// Line-oriented CSV reader that validates the header row.
class CsvReader {
 public:
  CsvReader(std::istream& in, std::string source, std::vector<std::string> expected_header);

  /// Next data row, skipping blank lines. False at end of input. Throws
  /// ParseError when the field count differs from the header's.
  bool next(std::vector<std::string_view>& fields);

  std::size_t line() const noexcept { return line_; }
  const std::string& source() const noexcept { return source_; }

  double number(std::string_view tok, std::string_view field) const {
    return to_double(tok, source_, line_, field);
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t columns_;
  std::string buf_;
  std::size_t line_ = 0;
};

/// Parses `key=value` lines. Blank lines and lines starting with '#' are
/// skipped; duplicate keys are a ParseError.
std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source);

/// Reads a whole file into a string; DataError if it cannot be opened.
std::string slurp(const std::filesystem::path& path);

/// 64-bit FNV-1a digest, hex encoded.
std::string fnv1a_hex(std::string_view bytes);

/// Fixed-point formatting with `digits` decimals.
std::string fixed(double v, int digits);

}  // namespace rainstat::textio
