#include "rainstat/textio.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rainstat/errors.hpp"

namespace rainstat::textio {

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

double to_double(std::string_view tok, const std::string& source, std::size_t line,
                 std::string_view field) {
  std::string_view t = tok;
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ParseError(source, line,
                     "field '" + std::string(field) + "': not a number: '" + std::string(tok) + "'");
  return v;
}

long long to_int(std::string_view tok, const std::string& source, std::size_t line,
                 std::string_view field) {
  long long v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError(source, line,
                     "field '" + std::string(field) + "': not an integer: '" + std::string(tok) +
                         "'");
  return v;
}

CsvReader::CsvReader(std::istream& in, std::string source,
                     std::vector<std::string> expected_header)
    : in_(in), source_(std::move(source)), columns_(expected_header.size()) {
  while (std::getline(in_, buf_)) {
    ++line_;
    if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();
    if (trim(buf_).empty()) continue;
    const auto header = split_csv(buf_);
    bool match = header.size() == expected_header.size();
    for (std::size_t i = 0; match && i < header.size(); ++i) match = header[i] == expected_header[i];
    if (!match) {
      std::string want;
      for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
      throw ParseError(source_, line_, "expected header '" + want + "'");
    }
    return;
  }
  throw ParseError(source_, line_ + 1, "missing header row");
}

bool CsvReader::next(std::vector<std::string_view>& fields) {
  while (std::getline(in_, buf_)) {
    ++line_;
    if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();
    if (trim(buf_).empty()) continue;
    fields = split_csv(buf_);
    if (fields.size() != columns_)
      throw ParseError(source_, line_,
                       "expected " + std::to_string(columns_) + " fields, found " +
                           std::to_string(fields.size()));
    return true;
  }
  return false;
}

std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, lineno, "expected key=value");
    const std::string key(trim(t.substr(0, eq)));
    if (key.empty()) throw ParseError(source, lineno, "empty key");
    if (!out.emplace(key, std::string(trim(t.substr(eq + 1)))).second)
      throw ParseError(source, lineno, "duplicate key '" + key + "'");
  }
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  // no "-0.0000"
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace rainstat::textio
