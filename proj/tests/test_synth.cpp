// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rcdm/errors.hpp"
#include "rcdm/synth.hpp"

using namespace rcdm;

namespace {

std::size_t labeled(const TimeSeriesDataset& d) {
  std::size_t n = 0;
  for (auto l : *d.labels) n += l;
  return n;
}

}  // namespace

TEST_CASE("outlier kinds round-trip through their names") {
  for (auto k : {OutlierKind::kSpike, OutlierKind::kLevelShift, OutlierKind::kStuck}) {
    CHECK(parse_outlier_kind(to_string(k)) == k);
  }
  CHECK(to_string(OutlierKind::kLevelShift) == "level-shift");
  CHECK_THROWS_AS(parse_outlier_kind("drift"), ValidationError);
}

TEST_CASE("clean signal is baseline plus trend plus sines") {
  SynthSpec s;
  s.length = 500;
  s.trend = 0.01;
  s.contamination_rate = 0.0;
  const auto d = generate(s);
  REQUIRE(d.clean.has_value());
  for (std::size_t i : {std::size_t{0}, std::size_t{37}, std::size_t{499}}) {
    const double x = static_cast<double>(i);
    const double expect = 10.0 + 0.01 * x + std::sin(2.0 * std::numbers::pi * x / 144.0) +
                          0.5 * std::sin(2.0 * std::numbers::pi * x / 1008.0);
    CHECK((*d.clean)[i] == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK(d.timestamps[1] - d.timestamps[0] == 600);
  CHECK(d.timestamps[0] == s.start);
  CHECK(labeled(d) == 0);
}

TEST_CASE("noise has the configured standard deviation") {
  SynthSpec s;
  s.length = 20000;
  s.contamination_rate = 0.0;
  s.noise_std = 0.3;
  const auto d = generate(s);
  double ss = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = d.values[i] - (*d.clean)[i];
    sum += r;
    ss += r * r;
  }
  const double n = static_cast<double>(d.size());
  CHECK(std::abs(sum / n) <= 4.0 * 0.3 / std::sqrt(n));
  CHECK(std::abs(ss / n - 0.09) <= 4.0 * 0.09 * std::sqrt(2.0 / n));
}

TEST_CASE("spikes: exact count, at least magnitude_min noise std away, never adjacent") {
  SynthSpec s;
  s.length = 10000;
  s.seed = 9;
  const auto d = generate(s);
  CHECK(outlier_count(s) == 200);
  CHECK(labeled(d) == 200);
  const auto& lab = *d.labels;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!lab[i]) continue;
    CHECK(std::abs(d.values[i] - (*d.clean)[i]) >= 5.0 * s.noise_std);
    if (i > 0) CHECK(lab[i - 1] == 0);
    if (i + 1 < d.size()) CHECK(lab[i + 1] == 0);
  }
}

TEST_CASE("segment kinds: level shifts and stuck values") {
  SynthSpec s;
  s.length = 3000;
  s.seed = 4;
  s.kinds = {OutlierKind::kLevelShift, OutlierKind::kStuck};
  const auto d = generate(s);
  CHECK(labeled(d) == outlier_count(s));
  const auto& lab = *d.labels;
  for (std::size_t i = 1; i < d.size(); ++i) {
    // Segment start: either stuck at the previous value or shifted.
    if (lab[i] && !lab[i - 1]) {
      std::size_t j = i;
      while (j < d.size() && lab[j]) ++j;
      CHECK(j - i <= s.segment_max);
      const bool stuck = d.values[i] == d.values[i - 1];
      for (std::size_t k = i; k < j; ++k) {
        if (stuck) CHECK(d.values[k] == d.values[i - 1]);
      }
    }
  }
}

TEST_CASE("generation is deterministic in the seed") {
  SynthSpec s;
  s.length = 1000;
  s.seed = 1;
  const auto a = generate(s), b = generate(s);
  CHECK(a.values == b.values);
  CHECK(*a.labels == *b.labels);
  s.seed = 2;
  CHECK(generate(s).values != a.values);
}

TEST_CASE("synth spec validation") {
  SynthSpec s;
  s.contamination_rate = 0.5;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = SynthSpec{};
  s.noise_std = 0.0;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = SynthSpec{};
  s.magnitude_min = 3.0;
  s.magnitude_max = 2.0;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = SynthSpec{};
  s.length = 1;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = SynthSpec{};
  s.interval = 0;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = SynthSpec{};
  s.segment_min = 0;
  CHECK_THROWS_AS(generate(s), ValidationError);
}
