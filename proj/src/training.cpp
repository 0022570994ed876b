// SPDX-License-Identifier: Apache-2.0
#include "rcdm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "rcdm/errors.hpp"

namespace rcdm {

void validate(const TrainConfig& c) {
  if (!(c.lr0 > 0.0 && c.lr_min > 0.0 && c.lr_min < c.lr0)) {
    throw ValidationError("train: need 0 < lr_min < lr0");
  }
  if (!(c.lr_decay > 0.0)) throw ValidationError("train: lr_decay must be positive");
  if (c.batch_size == 0) throw ValidationError("train: batch_size must be positive");
  if (!(c.huber_delta > 0.0)) throw ValidationError("train: huber_delta must be positive");
  if (!(c.mask_weight > 0.0)) throw ValidationError("train: mask_weight must be positive");
}

double huber(double residual, double delta) {
  const double a = std::abs(residual);
  return a <= delta ? residual * residual : a;
}

double huber_derivative(double residual, double delta) {
  if (std::abs(residual) <= delta) return 2.0 * residual;
  return residual > 0.0 ? 1.0 : -1.0;
}

double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr0, double lr_min) {
  if (epoch >= total_epochs) {
    throw ValidationError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(total_epochs) + ")");
  }
  if (total_epochs == 1) return lr0;
  const double phase = std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase));
}

double iteration_lr(double base, double decay, std::size_t iteration) {
  double lr = base;
  for (std::size_t j = 0; j < iteration; ++j) lr *= decay;
  return lr;
}

double batch_loss(const ModelParams& params, const ModelConfig& config, const NoiseSchedule& schedule,
                  const FeatureTable& table, std::span<const TrainingSample> batch, const LossSettings& loss,
                  ModelParams* grad) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  if (B == 0) return 0.0;
  const std::size_t C = config.context;
  const auto cov_dim = static_cast<Eigen::Index>(config.covariate_dim());

  Eigen::RowVectorXd xm(B);
  std::vector<std::size_t> steps(batch.size());
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& s = batch[static_cast<std::size_t>(b)];
    xm[b] = forward_diffuse(table.scaled[s.target_index], s.step, s.eps, schedule);
    steps[static_cast<std::size_t>(b)] = s.step;
  }

  GruUnroll gru;
  Eigen::MatrixXd condition;
  if (config.conditional) {
    std::vector<Eigen::MatrixXd> inputs(C, Eigen::MatrixXd(cov_dim, B));
    for (std::size_t j = 1; j <= C; ++j) {
      for (Eigen::Index b = 0; b < B; ++b) {
        unroll_covariate(batch[static_cast<std::size_t>(b)].target_index, j, table, C, inputs[j - 1].col(b));
      }
    }
    gru.forward(params.gru, inputs);
    condition = gru.condition();
  } else {
    condition.resize(cov_dim, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      unroll_covariate(batch[static_cast<std::size_t>(b)].target_index, C, table, C, condition.col(b));
    }
  }

  DenoiserBatch denoiser;
  const Eigen::RowVectorXd eps_hat = denoiser.forward(params.denoiser, xm, steps, condition);

  double total = 0.0;
  Eigen::RowVectorXd d_out(B);
  const double inv_b = 1.0 / static_cast<double>(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& s = batch[static_cast<std::size_t>(b)];
    const double r = s.eps - eps_hat[b];
    const double l = loss.huber ? huber(r, loss.delta) : r * r;
    const double dl = loss.huber ? huber_derivative(r, loss.delta) : 2.0 * r;
    total += s.weight * l;
    d_out[b] = -s.weight * dl * inv_b;
  }
  const double mean = total * inv_b;
  if (!std::isfinite(mean)) throw NumericError("non-finite training loss");

  if (grad) {
    const Eigen::MatrixXd d_condition = denoiser.backward(params.denoiser, d_out, grad->denoiser);
    if (config.conditional) gru.backward(params.gru, d_condition, grad->gru);
    for_each_block(*grad, [](const std::string& name, const auto& m) {
      if (!m.allFinite()) throw NumericError("non-finite gradient in parameter block '" + name + "'");
    });
  }
  return mean;
}

double window_loss(const Window& window, std::size_t step, double eps, const ModelParams& params,
                   const ModelConfig& config, const NoiseSchedule& schedule, const FeatureTable& table,
                   const LossSettings& loss, double mask_weight) {
  const TrainingSample s{window.target_index, step, eps, window.contains_imputed ? mask_weight : 1.0};
  return batch_loss(params, config, schedule, table, std::span(&s, 1), loss);
}

Adam::Adam(const ModelParams& like) : m_(zeros_like(like)), v_(zeros_like(like)) {}

void Adam::step(ModelParams& params, const ModelParams& grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  auto p = block_views(params);
  const auto g = block_views(grad);
  auto m = block_views(m_);
  auto v = block_views(v_);
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (Eigen::Index i = 0; i < p[k].size; ++i) {
      const double gi = g[k].data[i];
      double& mi = m[k].data[i];
      double& vi = v[k].data[i];
      mi = kBeta1 * mi + (1.0 - kBeta1) * gi;
      vi = kBeta2 * vi + (1.0 - kBeta2) * gi * gi;
      p[k].data[i] -= lr * (mi / c1) / (std::sqrt(vi / c2) + kEpsilon);
    }
  }
}

TrainResult train(const TimeSeriesDataset& dataset, const FeatureTable& table, const ModelConfig& model,
                  const TrainConfig& config, const NoiseSchedule& schedule, ModelParams init, std::size_t epochs,
                  double lr0, std::uint64_t seed) {
  validate(config);
  TrainResult result{std::move(init), {}};
  if (epochs == 0) return result;

  const auto windows = make_windows(dataset, table, model.context);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> pick_step(1, schedule.steps());
  std::normal_distribution<double> normal(0.0, 1.0);
  const LossSettings loss{model.huber, config.huber_delta};

  Adam adam(result.params);
  ModelParams grad = zeros_like(result.params);
  std::vector<TrainingSample> batch;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const double lr = cosine_lr(epoch, epochs, lr0, config.lr_min);
    std::shuffle(order.begin(), order.end(), gen);
    double weighted_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) {
        const auto& w = windows[order[i]];
        TrainingSample s;
        s.target_index = w.target_index;
        s.step = pick_step(gen);
        s.eps = normal(gen);
        s.weight = w.contains_imputed ? config.mask_weight : 1.0;
        batch.push_back(s);
      }
      for_each_block(grad, [](const std::string&, auto& m) { m.setZero(); });
      const double mean = batch_loss(result.params, model, schedule, table, batch, loss, &grad);
      weighted_sum += mean * static_cast<double>(batch.size());
      adam.step(result.params, grad, lr);
    }
    result.history.push_back({epoch, lr, weighted_sum / static_cast<double>(order.size())});
  }
  return result;
}

}  // namespace rcdm
