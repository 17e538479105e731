#pragma once

// Number formatting/parsing helpers shared by the file formats. All emitted
// floating-point text round-trips to the exact same double on re-parse.

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace tsadv {

// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// 17 significant digits; also round-trip exact, used by the on-disk formats
// that promise a fixed digit count.
inline std::string format_g17(double x) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf, buf + n);
}

// Percentages are rendered with one decimal digit everywhere.
inline std::string format_pct(double x) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.1f", x);
  return std::string(buf, buf + n);
}

// Strict full-token double parse; returns false on any trailing garbage.
inline bool parse_double(std::string_view token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

inline bool parse_int(std::string_view token, long long& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == delim) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// RFC-4180 style field escaping.
inline std::string csv_escape(std::string_view field) {
  const bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace tsadv
