// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include "synthforge/log.hpp"

#include <atomic>
#include <cctype>
#include <cstdio>
#include <mutex>

namespace synthforge {

namespace {

std::atomic<LogLevel> g_level{LogLevel::warn};
std::mutex g_mutex;

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "?";
}

}  // namespace

void set_log_level(LogLevel level) { g_level.store(level); }

LogLevel log_level() { return g_level.load(); }

bool set_log_level_from_string(std::string_view name) {
  std::string lower;
  lower.reserve(name.size());
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "error") { set_log_level(LogLevel::error); return true; }
  if (lower == "warn" || lower == "warning") { set_log_level(LogLevel::warn); return true; }
  if (lower == "info") { set_log_level(LogLevel::info); return true; }
  if (lower == "debug") { set_log_level(LogLevel::debug); return true; }
  return false;
}

void log_message(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(g_level.load())) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::fprintf(stderr, "[synthforge:%s] %s\n", level_tag(level), message.c_str());
}

}  // namespace synthforge
