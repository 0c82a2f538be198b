#pragma once

#include <functional>
#include <string>

namespace yieldnet {

enum class LogLevel { info, warning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Defaults to stderr. Tests install a capturing sink.
void set_log_sink(LogSink sink);
void log_message(LogLevel level, const std::string& message);

inline void log_warning(const std::string& message) { log_message(LogLevel::warning, message); }
inline void log_info(const std::string& message) { log_message(LogLevel::info, message); }

}  // namespace yieldnet
