// SPDX-License-Identifier: Apache-2.0
#include "rcdm/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "rcdm/errors.hpp"
#include "rcdm/random.hpp"

namespace rcdm {

OutlierKind parse_outlier_kind(const std::string& name) {
  if (name == "spike") return OutlierKind::kSpike;
  if (name == "level-shift") return OutlierKind::kLevelShift;
  if (name == "stuck") return OutlierKind::kStuck;
  throw ValidationError("unknown outlier kind '" + name + "' (expected spike, level-shift or stuck)");
}

std::string to_string(OutlierKind kind) {
  switch (kind) {
    case OutlierKind::kSpike: return "spike";
    case OutlierKind::kLevelShift: return "level-shift";
    case OutlierKind::kStuck: return "stuck";
  }
  return "spike";
}

void validate(const SynthSpec& s) {
  if (s.length < 2) throw ValidationError("synth: length must be >= 2");
  if (s.interval <= 0) throw ValidationError("synth: interval must be positive");
  if (!(s.noise_std > 0.0)) throw ValidationError("synth: noise_std must be positive");
  if (!(s.contamination_rate >= 0.0 && s.contamination_rate <= 0.2)) {
    throw ValidationError("synth: contamination rate must lie in [0, 0.2]");
  }
  if (s.kinds.empty()) throw ValidationError("synth: no outlier kinds");
  if (!(s.magnitude_min > 0.0 && s.magnitude_min <= s.magnitude_max)) {
    throw ValidationError("synth: need 0 < magnitude_min <= magnitude_max");
  }
  if (s.segment_min == 0 || s.segment_min > s.segment_max) {
    throw ValidationError("synth: need 1 <= segment_min <= segment_max");
  }
  for (const auto& c : s.components) {
    if (!(c.period > 0.0)) throw ValidationError("synth: sine periods must be positive");
  }
}

std::size_t outlier_count(const SynthSpec& spec) {
  return static_cast<std::size_t>(std::llround(spec.contamination_rate * static_cast<double>(spec.length)));
}

TimeSeriesDataset generate(const SynthSpec& spec) {
  validate(spec);
  const std::size_t n = spec.length;
  std::mt19937_64 gen(derive_seed(spec.seed, Stream::kSynth));
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> clean(n), values(n);
  std::vector<std::int64_t> timestamps(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = spec.baseline + spec.trend * static_cast<double>(i);
    for (const auto& c : spec.components) {
      v += c.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / c.period);
    }
    clean[i] = v;
    values[i] = v + spec.noise_std * normal(gen);
    timestamps[i] = spec.start + spec.interval * static_cast<std::int64_t>(i);
  }

  std::vector<std::uint8_t> labels(n, 0);
  // occupied marks labeled points and their immediate neighbours so events
  // never touch.
  std::vector<std::uint8_t> occupied(n, 0);
  std::uniform_int_distribution<std::size_t> pick_kind(0, spec.kinds.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_len(spec.segment_min, spec.segment_max);
  std::uniform_real_distribution<double> pick_mag(spec.magnitude_min, spec.magnitude_max);
  std::bernoulli_distribution coin(0.5);
  constexpr int kAttempts = 10000;

  std::size_t remaining = outlier_count(spec);
  while (remaining > 0) {
    const auto kind = spec.kinds[pick_kind(gen)];
    const std::size_t len = kind == OutlierKind::kSpike ? 1 : std::min(remaining, pick_len(gen));
    if (len > n) throw ValidationError("synth: outlier segment longer than the series");
    // Stuck segments copy the preceding value, so they need a predecessor.
    const std::size_t lo = kind == OutlierKind::kStuck ? 1 : 0;
    if (lo + len > n) throw ValidationError("synth: contamination too dense to place non-overlapping events");
    std::uniform_int_distribution<std::size_t> pick_start(lo, n - len);
    std::size_t start = n;
    for (int a = 0; a < kAttempts && start == n; ++a) {
      const std::size_t s = pick_start(gen);
      bool free = true;
      for (std::size_t i = s; i < s + len && free; ++i) free = occupied[i] == 0;
      if (free) start = s;
    }
    if (start == n) throw ValidationError("synth: contamination too dense to place non-overlapping events");

    const double sign = coin(gen) ? 1.0 : -1.0;
    const double mag = pick_mag(gen);
    for (std::size_t i = start; i < start + len; ++i) {
      switch (kind) {
        case OutlierKind::kSpike: {
          // Deviation from the clean signal is at least magnitude_min noise std.
          const double noise = values[i] - clean[i];
          const double dir = noise == 0.0 ? sign : (noise > 0.0 ? 1.0 : -1.0);
          values[i] = clean[i] + noise + dir * mag * spec.noise_std;
          break;
        }
        case OutlierKind::kLevelShift:
          values[i] += sign * mag * spec.noise_std;
          break;
        case OutlierKind::kStuck:
          values[i] = values[start - 1];
          break;
      }
      labels[i] = 1;
    }
    const std::size_t block_lo = start == 0 ? 0 : start - 1;
    const std::size_t block_hi = std::min(n, start + len + 1);
    for (std::size_t i = block_lo; i < block_hi; ++i) occupied[i] = 1;
    remaining -= len;
  }

  auto ds = make_dataset(std::move(timestamps), std::move(values));
  ds.labels = std::move(labels);
  ds.clean = std::move(clean);
  ds.timestamp_format = TimestampFormat::kIso8601;
  return ds;
}

}  // namespace rcdm
