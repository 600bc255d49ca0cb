#pragma once

#include <string>

namespace devlm {

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

/// Process-wide verbosity; messages go to stderr.
void set_log_level(LogLevel level);
LogLevel log_level();

void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace devlm
