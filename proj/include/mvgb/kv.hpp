// SPDX-License-Identifier: Apache-2.0
/**
 * @file   kv.hpp
 * @brief  Flat `key = value` text used by config files and checkpoint echoes.
 *
 * One pair per line; blank lines and lines starting with '#' are ignored.
 */
#pragma once

#include <charconv>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mvgb::kv {

using Map = std::map<std::string, std::string>;

class KeyValueError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Map parse(std::string_view text) {
  Map out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#')
      continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw KeyValueError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty())
      throw KeyValueError("line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, std::string(trim(line.substr(eq + 1)))).second)
      throw KeyValueError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  return out;
}

inline std::string format(const Map &m) {
  std::string out;
  for (const auto &[k, v] : m)
    out += k + " = " + v + "\n";
  return out;
}

inline std::string to_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string get(const Map &m, const std::string &key, std::string fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

inline std::size_t get_size(const Map &m, const std::string &key, std::size_t fallback) {
  auto it = m.find(key);
  if (it == m.end())
    return fallback;
  std::size_t v = 0;
  const auto &s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw KeyValueError(key + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

inline double get_double(const Map &m, const std::string &key, double fallback) {
  auto it = m.find(key);
  if (it == m.end())
    return fallback;
  const auto &s = it->second;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size())
      return v;
  } catch (const std::exception &) {
  }
  throw KeyValueError(key + ": expected a number, got '" + s + "'");
}

inline bool get_bool(const Map &m, const std::string &key, bool fallback) {
  auto it = m.find(key);
  if (it == m.end())
    return fallback;
  if (it->second == "true" || it->second == "1")
    return true;
  if (it->second == "false" || it->second == "0")
    return false;
  throw KeyValueError(key + ": expected true or false, got '" + it->second + "'");
}

} // namespace mvgb::kv
