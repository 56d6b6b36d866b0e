#pragma once

#include <filesystem>
#include <string>

#include "clv/experiment.hpp"

namespace clv {

// JSON with // comments. Throws ConfigError carrying the line for syntax
// errors and the field path for missing, unknown or invalid fields.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Inverse of parse_config (pretty-printed, stable key order).
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace clv
