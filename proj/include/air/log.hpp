#pragma once

#include <functional>
#include <string_view>

namespace air {

using WarningHandler = std::function<void(std::string_view)>;

/// Installs a process-wide warning sink (default: stderr) and returns the
/// previous one. Pass an empty handler to silence warnings.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

}  // namespace air
