#pragma once

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace tracersteer {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Read once from TRACERSTEER_LOG (error | info | debug); defaults to error.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("TRACERSTEER_LOG");
    if (env == nullptr) return LogLevel::error;
    const std::string_view v(env);
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    return LogLevel::error;
  }();
  return level;
}

template <typename... Args>
void log(LogLevel level, const Args&... args) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  constexpr std::string_view tags[] = {"error", "info", "debug"};
  std::cerr << "[tracersteer " << tags[static_cast<int>(level)] << "] ";
  (std::cerr << ... << args) << '\n';
}

}  // namespace tracersteer
