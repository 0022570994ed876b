// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace rcdm {

/// Named sub-streams of a run seed.
enum class Stream : std::uint32_t { kInit = 1, kTrain = 2, kPredict = 3, kResample = 4, kSynth = 5 };

/// Seed for sub-stream (stream, a, b) of `seed`, mixed through std::seed_seq.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),      static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),    static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32),   static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace rcdm
