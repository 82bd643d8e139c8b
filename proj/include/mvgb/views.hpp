// SPDX-License-Identifier: Apache-2.0
/**
 * @file   views.hpp
 * @brief  Input views and classification branch identifiers.
 */
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mvgb {

enum class View : std::uint8_t { mel = 0, gam = 1, cqt = 2, raw = 3 };

inline constexpr std::array<View, 4> kAllViews{View::mel, View::gam, View::cqt, View::raw};

/// A classification branch: one per view plus the joint branch over the
/// concatenated embedding.
enum class Branch : std::uint8_t { mel = 0, gam = 1, cqt = 2, raw = 3, joint = 4 };

inline constexpr std::size_t kMaxBranches = 5;

inline constexpr Branch branch_of(View v) { return static_cast<Branch>(v); }
inline constexpr std::size_t index_of(Branch b) { return static_cast<std::size_t>(b); }
inline constexpr std::size_t index_of(View v) { return static_cast<std::size_t>(v); }

inline std::string_view name_of(View v) {
  constexpr std::array<std::string_view, 4> names{"mel", "gam", "cqt", "raw"};
  return names[index_of(v)];
}

inline std::string_view name_of(Branch b) {
  constexpr std::array<std::string_view, 5> names{"mel", "gam", "cqt", "raw", "joint"};
  return names[index_of(b)];
}

inline View parse_view(std::string_view s) {
  for (View v : kAllViews)
    if (name_of(v) == s)
      return v;
  throw std::invalid_argument("unknown view '" + std::string(s) + "' (expected mel, gam, cqt or raw)");
}

inline Branch parse_branch(std::string_view s) {
  if (s == "joint")
    return Branch::joint;
  return branch_of(parse_view(s));
}

/// Comma separated view list, e.g. "mel,gam,cqt". Order is normalized and
/// duplicates rejected.
inline std::vector<View> parse_view_list(std::string_view s) {
  std::array<bool, 4> seen{};
  while (!s.empty()) {
    auto comma = s.find(',');
    View v = parse_view(s.substr(0, comma));
    if (seen[index_of(v)])
      throw std::invalid_argument("view '" + std::string(name_of(v)) + "' listed twice");
    seen[index_of(v)] = true;
    if (comma == std::string_view::npos)
      break;
    s.remove_prefix(comma + 1);
  }
  std::vector<View> out;
  for (View v : kAllViews)
    if (seen[index_of(v)])
      out.push_back(v);
  if (out.empty())
    throw std::invalid_argument("empty view list");
  return out;
}

} // namespace mvgb
