// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rcdm/dataset.hpp"
#include "rcdm/networks.hpp"

namespace rcdm {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  ModelParams params;
  Scaler scaler;
  std::uint64_t seed = 0;
  std::size_t iteration = 0;  // cleaning iteration that produced the weights
  std::string config_hash;    // model_hash() of the producing run
};

/// JSON container; doubles are written in shortest round-trip form, so
/// write-then-read is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rcdm
