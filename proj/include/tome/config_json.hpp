#pragma once

#include <filesystem>
#include <string>

#include "tome/config.hpp"

namespace tome {

/// Parses a model config from its JSON form. All ModelConfig fields are
/// accepted by their snake_case names; missing ones keep their defaults.
/// The "tome" object's "schedule" is an integer array; if absent it
/// defaults to all zeros at the configured depth.
ModelConfig config_from_json(const std::string& json_text);

ModelConfig load_config(const std::filesystem::path& path);

std::string config_to_json(const ModelConfig& cfg);

}  // namespace tome
