#pragma once

#include <string>

#include "fd/engine.hpp"

namespace fd {

/// Parse a JSON experiment config. Unknown keys anywhere are hard errors;
/// missing keys take the documented defaults. Throws ConfigError.
ExperimentConfig parse_config_json(const std::string& text);

ExperimentConfig load_config(const std::string& path);

/// Canonical resolved form: every field present, keys sorted. Parsing the
/// output yields the identical config.
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace fd
