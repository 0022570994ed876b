// SPDX-License-Identifier: Apache-2.0
#include "rcdm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "rcdm/errors.hpp"
#include "rcdm/random.hpp"

namespace rcdm {

void validate(const PipelineConfig& c) {
  if (c.samples < 2) throw ValidationError("pipeline: samples must be >= 2");
  if (!(c.tau > 0.0)) throw ValidationError("pipeline: tau must be positive");
  if (c.max_iterations == 0) throw ValidationError("pipeline: max_iterations must be >= 1");
  if (!(c.k > 0.0 && c.k < 1.0)) throw ValidationError("pipeline: k must lie in (0, 1)");
  if (!(c.threshold >= 0.0 && c.threshold < 1.0)) throw ValidationError("pipeline: threshold must lie in [0, 1)");
  if (!(c.train_fraction > 0.0 && c.train_fraction <= 1.0)) {
    throw ValidationError("pipeline: train_fraction must lie in (0, 1]");
  }
  if (c.resample_count == 0) throw ValidationError("pipeline: resample_count must be positive");
  if (!(c.subset_fraction > 0.0 && c.subset_fraction <= 1.0)) {
    throw ValidationError("pipeline: subset_fraction must lie in (0, 1]");
  }
  if (c.threads == 0) throw ValidationError("pipeline: threads must be >= 1");
  if (c.model.context == 0) throw ValidationError("model: context must be >= 1");
  if (c.model.gru_layers == 0 || c.model.gru_hidden == 0) throw ValidationError("model: empty GRU");
  if (c.model.denoiser_hidden == 0) throw ValidationError("model: denoiser_hidden must be >= 1");
  if (c.model.step_embedding == 0 || c.model.step_embedding % 2 != 0) {
    throw ValidationError("model: step_embedding must be a positive even number");
  }
  validate(c.train);
}

NoiseSchedule make_schedule(const ModelConfig& model) {
  return NoiseSchedule::linear(model.steps, model.beta_min, model.beta_max);
}

bool check_convergence(double sigma2_prev, double sigma2_curr, double tau) {
  return std::abs(sigma2_curr - sigma2_prev) <= tau * std::max(sigma2_prev, 1e-12);
}

Scaler fit_configured_scaler(const TimeSeriesDataset& dataset, const ModelConfig& model) {
  const std::span<const double> train(dataset.values.data(), dataset.train_size);
  return model.quartile ? fit_scaler(train) : fit_zscore_scaler(train);
}

Assessment predict_and_estimate(const TimeSeriesDataset& dataset, const Scaler& scaler, const ModelParams& params,
                                const PipelineConfig& config) {
  const std::size_t C = config.model.context;
  if (dataset.train_size < C + 2) {
    throw ValidationError("need at least C + 2 = " + std::to_string(C + 2) + " training points, have " +
                          std::to_string(dataset.train_size));
  }
  const auto schedule = make_schedule(config.model);
  const auto table = build_feature_table(dataset, scaler);

  Assessment out;
  SamplerOptions options;
  options.samples = config.samples;
  options.seed = derive_seed(config.seed, Stream::kPredict);
  options.threads = config.threads;
  out.predictions = predict_range(C, dataset.size(), table, params, config.model, schedule, options);

  std::vector<double> residuals;
  residuals.reserve(dataset.train_size - C);
  for (std::size_t t = C; t < dataset.train_size; ++t) residuals.push_back(table.scaled[t] - out.predictions[t - C].mu);
  out.error = estimate_error_variance(residuals, config.resample_count, config.subset_fraction,
                                      derive_seed(config.seed, Stream::kResample));
  return out;
}

void score(Assessment& a, const TimeSeriesDataset& dataset, const Scaler& scaler, const PipelineConfig& config) {
  QesInput q;
  q.span = a.predictions.size();
  q.k = config.k;
  a.scores.clear();
  a.scores.reserve(a.predictions.size());
  for (const auto& p : a.predictions) {
    const auto s = score_point(p.index, scaler.scale(dataset.values[p.index]), p.mu, p.sigma * p.sigma,
                               a.error.sigma2, config.samples, config.threshold);
    if (s.flagged) q.probs.push_back(s.p_o);
    a.scores.push_back(s);
  }
  q.flagged = q.probs.size();
  a.flagged = q.flagged;
  a.qes = qes(q);
  a.scored = true;
}

Assessment assess(const TimeSeriesDataset& dataset, const Scaler& scaler, const ModelParams& params,
                  const PipelineConfig& config) {
  auto a = predict_and_estimate(dataset, scaler, params, config);
  score(a, dataset, scaler, config);
  return a;
}

const IterationRecord& CleaningResult::last_scored() const {
  for (auto it = iterations.rbegin(); it != iterations.rend(); ++it)
    if (it->assessment.scored) return *it;
  throw ValidationError("cleaning result has no scored iteration");
}

std::vector<double> CleaningResult::qes_history() const {
  std::vector<double> out;
  for (const auto& it : iterations)
    if (it.assessment.scored) out.push_back(it.assessment.qes);
  return out;
}

CleaningState start_cleaning(const TimeSeriesDataset& dataset, const PipelineConfig& config) {
  validate(config);
  CleaningState state;
  state.dataset = dataset;
  std::fill(state.dataset.mask.begin(), state.dataset.mask.end(), std::uint8_t{0});
  set_train_fraction(state.dataset, config.train_fraction);
  if (state.dataset.train_size < config.model.context + 2) {
    throw ValidationError("training split of " + std::to_string(state.dataset.train_size) +
                          " points is shorter than C + 2 = " + std::to_string(config.model.context + 2));
  }
  state.scaler = fit_configured_scaler(state.dataset, config.model);
  state.params = init_params(derive_seed(config.seed, Stream::kInit), config.model);
  return state;
}

IterationRecord run_iteration(CleaningState& state, const PipelineConfig& config) {
  const std::size_t j = state.iteration;
  const auto schedule = make_schedule(config.model);
  IterationRecord rec;
  rec.iteration = j;
  rec.lr0 = iteration_lr(config.train.lr0, config.train.lr_decay, j);
  const std::size_t epochs = j == 0 ? config.train.epochs_first : config.train.epochs_iteration;

  {
    const auto table = build_feature_table(state.dataset, state.scaler);
    auto trained = train(state.dataset, table, config.model, config.train, schedule, std::move(state.params), epochs,
                         rec.lr0, derive_seed(config.seed, Stream::kTrain, j));
    state.params = std::move(trained.params);
    rec.history = std::move(trained.history);
  }

  rec.assessment = predict_and_estimate(state.dataset, state.scaler, state.params, config);
  const double sigma2 = rec.assessment.error.sigma2;
  rec.converged = state.has_previous && check_convergence(state.sigma2_prev, sigma2, config.tau);
  state.has_previous = true;
  state.sigma2_prev = sigma2;

  if (!rec.converged) {
    score(rec.assessment, state.dataset, state.scaler, config);
    // Refresh the probabilities of points already in the low-quality set.
    const std::size_t C = config.model.context;
    for (auto& lq : state.low_quality) lq.p_o_final = rec.assessment.scores[lq.index - C].p_o;

    std::map<std::size_t, std::size_t> known;
    for (std::size_t i = 0; i < state.low_quality.size(); ++i) known[state.low_quality[i].index] = i;
    for (const auto& s : rec.assessment.scores) {
      if (!s.flagged) continue;
      const bool training = s.index < state.dataset.train_size;
      if (!known.contains(s.index)) {
        LowQualityPoint lq;
        lq.index = s.index;
        lq.timestamp = state.dataset.timestamps[s.index];
        lq.original = state.dataset.values[s.index];
        lq.imputed = lq.original;
        lq.in_training = training;
        lq.p_o_flagged = s.p_o;
        lq.p_o_final = s.p_o;
        lq.iteration = j;
        state.low_quality.push_back(lq);
        known[s.index] = state.low_quality.size() - 1;
        ++rec.newly_flagged;
      }
      if (training) {
        const double value = state.scaler.unscale(rec.assessment.predictions[s.index - C].mu);
        impute(state.dataset, s.index, value);
        state.low_quality[known[s.index]].imputed = value;
        rec.imputed.push_back(s.index);
      }
    }
    std::sort(state.low_quality.begin(), state.low_quality.end(),
              [](const LowQualityPoint& a, const LowQualityPoint& b) { return a.index < b.index; });
  }
  ++state.iteration;
  return rec;
}

CleaningResult run_cleaning(const TimeSeriesDataset& dataset, const PipelineConfig& config,
                            const ProgressFn& progress) {
  auto state = start_cleaning(dataset, config);
  CleaningResult result;
  while (state.iteration < config.max_iterations) {
    auto rec = run_iteration(state, config);
    if (progress) progress(rec, state);
    const bool done = rec.converged;
    result.iterations.push_back(std::move(rec));
    if (done) {
      result.converged = true;
      break;
    }
  }
  result.cleaned = std::move(state.dataset);
  result.low_quality = std::move(state.low_quality);
  result.scaler = state.scaler;
  result.params = std::move(state.params);
  return result;
}

}  // namespace rcdm
