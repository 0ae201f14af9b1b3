#pragma once

#include "air/runner.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace air {

/// Parses sectioned key = value text into a validated RunConfig. Unknown
/// sections or keys, duplicates, malformed values and missing required keys
/// throw ConfigError carrying the "section.key" path.
///
/// Required: kernel.family, adaptation.rule, chain.beta, chain.horizon.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Every field, defaults included, in parse_config's format.
std::string serialise(const RunConfig& config);

/// FNV-1a 64 of serialise(config), as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace air
