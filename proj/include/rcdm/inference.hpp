// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rcdm/dataset.hpp"
#include "rcdm/networks.hpp"
#include "rcdm/schedule.hpp"

namespace rcdm {

/// Sample summary at one time index, scaled units.
struct PredictivePoint {
  std::size_t index = 0;
  double mu = 0.0;
  double sigma = 0.0;
  std::vector<double> samples;  // kept only on request
};

struct ErrorVariance {
  double sigma2 = 0.0;
  std::size_t resample_count = 0;
  double subset_fraction = 0.0;
};

struct PredictiveGaussian {
  double mean = 0.0;
  double variance = 0.0;
};

struct SamplerOptions {
  std::size_t samples = 100;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool keep_samples = false;
};

/// Conditioning vectors for targets [first, last), one column each: the final
/// GRU state after unrolling the context window, or the raw covariates when
/// the recurrent embedding is disabled.
Eigen::MatrixXd conditions_for(std::size_t first, std::size_t last, const FeatureTable& table,
                               const ModelParams& params, const ModelConfig& config);

/// One reverse-diffusion chain from x^T ~ N(0, 1) down to x^0. Draws x^T and
/// then one z per step m = T..2 from `rng`.
double sample_trajectory(const Eigen::VectorXd& condition, const ModelParams& params, const NoiseSchedule& schedule,
                         std::mt19937_64& rng);

/// Seed of the stream that drives sample `sample` at time index `index`.
std::uint64_t sample_stream_seed(std::uint64_t seed, std::size_t index, std::size_t sample);

/// Mean and (M - 1)-normalized standard deviation of the draws. Needs M >= 2.
PredictivePoint summarize_samples(std::size_t index, std::span<const double> samples, bool keep = false);

PredictivePoint predict_point(std::size_t t, const FeatureTable& table, const ModelParams& params,
                              const ModelConfig& config, const NoiseSchedule& schedule, const SamplerOptions& options);

/// Predictions for every index in [first, last). Results do not depend on the
/// thread count.
std::vector<PredictivePoint> predict_range(std::size_t first, std::size_t last, const FeatureTable& table,
                                           const ModelParams& params, const ModelConfig& config,
                                           const NoiseSchedule& schedule, const SamplerOptions& options);

/// Average over `resample_count` random subsets (drawn without replacement,
/// ceil(fraction * n) elements each) of the unbiased subset variance.
ErrorVariance estimate_error_variance(std::span<const double> residuals, std::size_t resample_count,
                                      double subset_fraction, std::uint64_t seed);

/// N(mu_t, sigma_t^2 + sigma^2).
PredictiveGaussian predictive_distribution(const PredictivePoint& point, const ErrorVariance& error);

}  // namespace rcdm
