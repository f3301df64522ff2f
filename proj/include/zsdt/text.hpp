#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace zsdt::text {

inline bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string_view trim_right(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Trimmed, lower-cased, internal whitespace runs collapsed to one space.
inline std::string fold(std::string_view s) {
  s = trim(s);
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

/// Drops one trailing "(...)" annotation, e.g. "petal width (cm)" -> "petal width".
inline std::string_view strip_annotation(std::string_view s) noexcept {
  s = trim(s);
  if (s.empty() || s.back() != ')') return s;
  int level = 0;
  for (std::size_t i = s.size(); i-- > 0;) {
    if (s[i] == ')') ++level;
    if (s[i] == '(' && --level == 0) {
      auto head = trim(s.substr(0, i));
      return head.empty() ? s : head;
    }
  }
  return s;
}

/// Matching key for feature names: annotation stripped, then folded.
inline std::string feature_key(std::string_view name) { return fold(strip_annotation(name)); }

inline bool iequals_folded(std::string_view a, std::string_view b) { return fold(a) == fold(b); }

/// Strict decimal literal: optional sign, digits with optional fraction.
/// No exponent, no thousands separators, no surrounding text.
inline std::optional<double> parse_decimal(std::string_view s) noexcept {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool negative = false;
  if (s[0] == '+' || s[0] == '-') {
    negative = s[0] == '-';
    i = 1;
  }
  std::size_t digits = 0;
  bool dot = false;
  for (std::size_t j = i; j < s.size(); ++j) {
    if (std::isdigit(static_cast<unsigned char>(s[j]))) {
      ++digits;
    } else if (s[j] == '.' && !dot) {
      dot = true;
    } else {
      return std::nullopt;
    }
  }
  if (digits == 0) return std::nullopt;
  std::string_view body = s.substr(i);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value,
                                   std::chars_format::fixed);
  if (ec != std::errc() || ptr != body.data() + body.size()) return std::nullopt;
  return negative ? -value : value;
}

/// General numeric cell parser (accepts exponents); used for data files, not tree text.
inline std::optional<double> parse_number(std::string_view s) noexcept {
  s = trim(s);
  if (!s.empty() && s[0] == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

/// Shortest fixed-notation text that parses back to the same double.
inline std::string format_number(double v) {
  std::array<char, 512> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf.data(), ptr);
}

/// Like format_number but with at least `min_decimals` fractional digits.
inline std::string format_threshold(double v, int min_decimals = 2) {
  std::string s = format_number(v);
  auto dot = s.find('.');
  int have = 0;
  if (dot == std::string::npos) {
    s.push_back('.');
  } else {
    have = static_cast<int>(s.size() - dot - 1);
  }
  for (; have < min_decimals; ++have) s.push_back('0');
  return s;
}

/// Splits on '\n', dropping one trailing '\r' per line.
inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    auto line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    if (end == s.size()) break;
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) return s;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

}  // namespace zsdt::text
