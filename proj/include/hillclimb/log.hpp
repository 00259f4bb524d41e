#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string_view>

namespace hillclimb {

enum class LogLevel { debug, info, warning };

using LogSink = std::function<void(LogLevel, std::string_view)>;

namespace detail {

struct LogState {
  std::mutex mu;
  LogSink sink;
  LogLevel threshold = LogLevel::warning;
};

inline LogState& log_state() {
  static LogState state;
  return state;
}

}  // namespace detail

/// Replace the global sink. Passing an empty function restores stderr output.
inline void set_log_sink(LogSink sink) {
  auto& s = detail::log_state();
  std::lock_guard lock(s.mu);
  s.sink = std::move(sink);
}

inline void set_log_level(LogLevel level) {
  auto& s = detail::log_state();
  std::lock_guard lock(s.mu);
  s.threshold = level;
}

inline void log(LogLevel level, std::string_view msg) {
  auto& s = detail::log_state();
  std::lock_guard lock(s.mu);
  if (level < s.threshold) return;
  if (s.sink) {
    s.sink(level, msg);
    return;
  }
  static constexpr const char* names[] = {"debug", "info", "warning"};
  std::clog << "[hillclimb " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

}  // namespace hillclimb
