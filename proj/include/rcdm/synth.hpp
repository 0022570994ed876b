// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rcdm/dataset.hpp"

namespace rcdm {

enum class OutlierKind { kSpike, kLevelShift, kStuck };

OutlierKind parse_outlier_kind(const std::string& name);
std::string to_string(OutlierKind kind);

struct SineComponent {
  double amplitude = 1.0;
  double period = 144.0;  // in samples
};

struct SynthSpec {
  std::size_t length = 10000;
  std::int64_t interval = 600;          // seconds
  std::int64_t start = 1704067200;      // 2024-01-01T00:00:00Z
  std::vector<SineComponent> components{{1.0, 144.0}, {0.5, 1008.0}};
  double baseline = 10.0;
  double trend = 0.0;  // per sample
  double noise_std = 0.1;
  double contamination_rate = 0.02;
  std::vector<OutlierKind> kinds{OutlierKind::kSpike};
  double magnitude_min = 5.0;  // deviations in units of noise_std
  double magnitude_max = 12.0;
  std::size_t segment_min = 5;  // level-shift / stuck segment length
  std::size_t segment_max = 20;
  std::uint64_t seed = 0;
};

void validate(const SynthSpec& spec);

/// Number of labeled points a spec produces: round(rate * length).
std::size_t outlier_count(const SynthSpec& spec);

/// Seasonal signal plus trend plus Gaussian noise with non-overlapping,
/// non-adjacent outlier events. Labels mark exactly the corrupted indices and
/// `clean` holds the noise-free signal. Deterministic in the spec.
TimeSeriesDataset generate(const SynthSpec& spec);

}  // namespace rcdm
