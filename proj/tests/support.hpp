// SPDX-License-Identifier: Apache-2.0
// Small fixtures shared by the unit tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "rcdm/dataset.hpp"
#include "rcdm/networks.hpp"

namespace rcdm::test {

inline constexpr std::int64_t kJan1 = 1704067200;  // 2024-01-01T00:00:00Z, a Monday

/// Noisy daily sine at 10-minute spacing.
inline TimeSeriesDataset sine_series(std::size_t n, double noise = 0.05, std::uint64_t seed = 1) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, noise);
  std::vector<std::int64_t> ts(n);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = kJan1 + 600 * static_cast<std::int64_t>(i);
    v[i] = 5.0 + std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 144.0) + normal(gen);
  }
  return make_dataset(std::move(ts), std::move(v));
}

/// A model small enough for gradient checks and quick training runs.
inline ModelConfig tiny_model() {
  ModelConfig m;
  m.context = 6;
  m.steps = 10;
  m.beta_max = 0.3;
  m.gru_layers = 2;
  m.gru_hidden = 5;
  m.denoiser_hidden = 8;
  m.residual_blocks = 2;
  m.step_embedding = 4;
  return m;
}

/// Fresh directory under the system temp dir, removed first if present.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rcdm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rcdm::test
