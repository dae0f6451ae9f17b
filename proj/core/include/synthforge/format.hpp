// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <string>
#include <string_view>

namespace synthforge {

/// Shortest decimal string that parses back to exactly the same double.
inline std::string double_to_string(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Full-string double parse; returns false on trailing garbage or overflow.
inline bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  // from_chars does not accept a leading '+'.
  if (text.front() == '+') text.remove_prefix(1);
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

/// Full-string signed 64-bit integer parse.
inline bool parse_int64(std::string_view text, long long& out) {
  if (text.empty()) return false;
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

}  // namespace synthforge
