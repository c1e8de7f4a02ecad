#pragma once

#include <functional>
#include <string>

namespace hrex {

using LogSink = std::function<void(const std::string&)>;

/// Replaces the warning sink (default: one line on stderr). Passing an empty
/// function restores the default.
void set_log_sink(LogSink sink);

void log_warning(const std::string& message);

}  // namespace hrex
