#pragma once

#include <string>

#include "mheq/experiment.hpp"

namespace mheq::config {

// Parses an experiment configuration from JSON text. Every key is optional
// and falls back to the built-in baseline study; unknown keys anywhere in
// the document are rejected with std::invalid_argument.
experiment::ExperimentConfig from_json_text(const std::string& text);

// Reads and parses a JSON configuration file.
experiment::ExperimentConfig load(const std::string& path);

// Serializes a configuration back to pretty-printed JSON (round-trips
// through from_json_text).
std::string to_json_text(const experiment::ExperimentConfig& cfg);

}  // namespace mheq::config
