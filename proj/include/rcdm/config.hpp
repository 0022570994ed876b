// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "rcdm/pipeline.hpp"
#include "rcdm/synth.hpp"

namespace rcdm {

/// Everything a command needs. `pipeline.model` and `pipeline.train` are the
/// "model" and "train" sections of the JSON form; the seed is shared by all
/// sections.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  PipelineConfig pipeline;
  SynthSpec synth;
};

nlohmann::json to_json(const RunConfig& config);

/// Strict conversion: every key must be known, every value well-typed.
/// Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Defaults, overlaid by the file (if any), overlaid by `key=value`
/// assignments with dotted keys such as "model.context=24". Values are parsed
/// as JSON when possible and as plain strings otherwise.
RunConfig load_run_config(const std::filesystem::path& file, const std::vector<std::string>& assignments);

/// Applies one dotted assignment to a JSON config. Unknown keys are errors.
void apply_assignment(nlohmann::json& j, const std::string& assignment);

/// FNV-1a of the canonical JSON of everything that affects results (threads
/// excluded), as 16 hex digits.
std::string config_hash(const RunConfig& config);
/// Same over the model section alone; stored in checkpoints.
std::string model_hash(const ModelConfig& model);

std::string fnv1a_hex(const std::string& text);

nlohmann::json to_json(const ModelConfig& model);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Named ablation switch: no-huber, no-conditional or no-quartile.
void apply_ablation(ModelConfig& model, const std::string& name);

}  // namespace rcdm
