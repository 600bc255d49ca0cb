#include "devlm/logging.hpp"

#include <atomic>
#include <iostream>

namespace devlm {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::kQuiet)};
}

void set_log_level(LogLevel level) { g_level.store(static_cast<int>(level)); }
LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_info(const std::string& message) {
  if (g_level.load() >= static_cast<int>(LogLevel::kInfo)) std::clog << "[devlm] " << message << '\n';
}

void log_debug(const std::string& message) {
  if (g_level.load() >= static_cast<int>(LogLevel::kDebug)) std::clog << "[devlm:debug] " << message << '\n';
}

}  // namespace devlm
