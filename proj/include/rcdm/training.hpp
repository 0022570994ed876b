// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rcdm/dataset.hpp"
#include "rcdm/networks.hpp"
#include "rcdm/schedule.hpp"

namespace rcdm {

struct TrainConfig {
  std::size_t epochs_first = 20;      // first cleaning round
  std::size_t epochs_iteration = 10;  // warm-started rounds
  double lr0 = 1e-3;
  double lr_min = 1e-9;
  double lr_decay = 0.3;  // lr0 multiplier per cleaning iteration
  std::size_t batch_size = 64;
  double huber_delta = 1.0;
  double mask_weight = 0.5;  // loss weight of windows touching imputed values
};

void validate(const TrainConfig& config);

/// r^2 for |r| <= delta, |r| otherwise.
double huber(double residual, double delta);
/// d huber / d residual; the quadratic side is used at |r| = delta.
double huber_derivative(double residual, double delta);

/// lr_min + (lr0 - lr_min)(1 + cos(pi epoch / (total - 1))) / 2.
double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr0, double lr_min);

/// lr0 of cleaning iteration j: base * decay^j.
double iteration_lr(double base, double decay, std::size_t iteration);

/// One loss term: window target t diffused to step m with noise eps.
struct TrainingSample {
  std::size_t target_index = 0;
  std::size_t step = 1;
  double eps = 0.0;
  double weight = 1.0;
};

struct LossSettings {
  bool huber = true;
  double delta = 1.0;
};

/// Mean over the batch of weight * loss(eps - eps_hat). When `grad` is given
/// (shaped like `params`) the exact gradient of that mean is added to it.
/// Throws NumericError naming the parameter array if a gradient is not finite.
double batch_loss(const ModelParams& params, const ModelConfig& config, const NoiseSchedule& schedule,
                  const FeatureTable& table, std::span<const TrainingSample> batch, const LossSettings& loss,
                  ModelParams* grad = nullptr);

/// Loss of a single window.
double window_loss(const Window& window, std::size_t step, double eps, const ModelParams& params,
                   const ModelConfig& config, const NoiseSchedule& schedule, const FeatureTable& table,
                   const LossSettings& loss, double mask_weight = 0.5);

class Adam {
 public:
  explicit Adam(const ModelParams& like);
  void step(ModelParams& params, const ModelParams& grad, double lr);
  std::size_t steps_taken() const { return t_; }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

 private:
  ModelParams m_, v_;
  std::size_t t_ = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
};

/// Shuffled mini-batch Adam over all windows of the training split, one
/// diffusion step and noise draw per window per epoch, cosine-annealed
/// learning rate. Deterministic in `seed`.
TrainResult train(const TimeSeriesDataset& dataset, const FeatureTable& table, const ModelConfig& model,
                  const TrainConfig& config, const NoiseSchedule& schedule, ModelParams init, std::size_t epochs,
                  double lr0, std::uint64_t seed);

}  // namespace rcdm
