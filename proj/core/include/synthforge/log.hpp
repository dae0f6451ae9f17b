// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace synthforge {

/// Log verbosity.  Messages at a level above the active one are dropped.
/// Logging never changes numeric behaviour; it only controls what is printed
/// to stderr.
enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

void set_log_level(LogLevel level);
LogLevel log_level();

/// Parses "error" / "warn" / "info" / "debug" (case-insensitive).
/// Unknown strings leave the level untouched and return false.
bool set_log_level_from_string(std::string_view name);

void log_message(LogLevel level, const std::string& message);

inline void log_error(const std::string& m) { log_message(LogLevel::error, m); }
inline void log_warn(const std::string& m) { log_message(LogLevel::warn, m); }
inline void log_info(const std::string& m) { log_message(LogLevel::info, m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::debug, m); }

}  // namespace synthforge
