#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace floodgsa::log {

using Sink = std::function<void(std::string_view)>;

// Warnings go to stderr unless a sink is installed. Thread-safe.
void warn(std::string_view message);

// Returns the previous sink. An empty sink restores stderr.
Sink set_warning_sink(Sink sink);

}  // namespace floodgsa::log
