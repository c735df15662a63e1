#pragma once

#include <string>

#include <json.hpp>

#include "fedcanon/harness.hpp"

namespace fedcanon {

using Json = nlohmann::ordered_json;

// Schema documented in the README; unknown keys are rejected. A summary file
// produced by the CLI (object with a top-level "config" key) is accepted too,
// so runs can be reproduced from their own summaries.
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig config_from_file(const std::string& path);

// Fully-resolved echo of a config, including defaulted fields.
Json config_to_json(const ExperimentConfig& cfg);

// Applies a dotted-path override like "regularizer.kappa=0.5" or "alpha=0.2";
// the value is parsed as JSON when possible, else taken as a string.
void apply_override(Json& j, const std::string& keyval);

}  // namespace fedcanon
