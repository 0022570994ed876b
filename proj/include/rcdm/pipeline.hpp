// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rcdm/dataset.hpp"
#include "rcdm/inference.hpp"
#include "rcdm/networks.hpp"
#include "rcdm/quality.hpp"
#include "rcdm/schedule.hpp"
#include "rcdm/training.hpp"

namespace rcdm {

struct PipelineConfig {
  std::size_t samples = 100;  // M
  double tau = 0.02;          // relative tolerance on the error-variance change
  std::size_t max_iterations = 10;
  double k = 0.1;
  double threshold = 0.5;
  double train_fraction = 0.7;
  std::size_t resample_count = 50;
  double subset_fraction = 0.5;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  ModelConfig model;
  TrainConfig train;
};

void validate(const PipelineConfig& config);

NoiseSchedule make_schedule(const ModelConfig& model);

/// |curr - prev| <= tau * max(prev, 1e-12).
bool check_convergence(double sigma2_prev, double sigma2_curr, double tau);

/// One scoring pass of a fixed model over every index t >= C. All values are
/// in scaled units.
struct Assessment {
  std::vector<PredictivePoint> predictions;
  ErrorVariance error;
  bool scored = false;                // false for a pass that stopped at the convergence check
  std::vector<OutlierScore> scores;  // aligned with predictions when scored
  std::size_t flagged = 0;
  double qes = 1.0;
};

/// Predicts every point and estimates the error variance from training
/// residuals, without scoring. Every iteration draws the same sampler and
/// resampling streams, so sigma^2 and QES differences between iterations come
/// from the model.
Assessment predict_and_estimate(const TimeSeriesDataset& dataset, const Scaler& scaler, const ModelParams& params,
                                const PipelineConfig& config);

/// Outlier probabilities, flags and QES for the predictions in `a`.
void score(Assessment& a, const TimeSeriesDataset& dataset, const Scaler& scaler, const PipelineConfig& config);

/// predict_and_estimate followed by score.
Assessment assess(const TimeSeriesDataset& dataset, const Scaler& scaler, const ModelParams& params,
                  const PipelineConfig& config);

struct IterationRecord {
  std::size_t iteration = 0;
  double lr0 = 0.0;
  std::vector<EpochStats> history;
  Assessment assessment;
  bool converged = false;            // convergence reached at this iteration
  std::vector<std::size_t> imputed;  // training indices written this iteration
  std::size_t newly_flagged = 0;
};

struct LowQualityPoint {
  std::size_t index = 0;
  std::int64_t timestamp = 0;
  double original = 0.0;
  double imputed = 0.0;  // value written to the dataset; equals original for test points
  bool in_training = true;
  double p_o_flagged = 0.0;  // probability at the iteration that flagged it
  double p_o_final = 0.0;    // probability in the last iteration
  std::size_t iteration = 0;
};

struct CleaningResult {
  TimeSeriesDataset cleaned;
  std::vector<LowQualityPoint> low_quality;  // ascending index
  std::vector<IterationRecord> iterations;
  Scaler scaler;
  ModelParams params;
  bool converged = false;
  std::size_t iterations_used() const { return iterations.size(); }
  /// The last iteration that computed outlier probabilities. A converged
  /// iteration stops at the convergence check, so this is the one before it.
  const IterationRecord& last_scored() const;
  /// QES of every scored iteration, in order.
  std::vector<double> qes_history() const;
};

/// Mutable loop state between iterations.
struct CleaningState {
  TimeSeriesDataset dataset;
  Scaler scaler;
  ModelParams params;
  std::vector<LowQualityPoint> low_quality;
  std::size_t iteration = 0;  // index of the next iteration
  bool has_previous = false;
  double sigma2_prev = 0.0;
};

/// Fits the scaler on the training split and initializes the weights.
CleaningState start_cleaning(const TimeSeriesDataset& dataset, const PipelineConfig& config);

/// One pass of the loop. Trains (warm-started after the first pass), predicts
/// and estimates sigma^2; unless that has converged, scores, flags and imputes.
IterationRecord run_iteration(CleaningState& state, const PipelineConfig& config);

/// Called after every iteration with the record and the loop state.
using ProgressFn = std::function<void(const IterationRecord&, const CleaningState&)>;

/// Iterative cleaning: train, predict, estimate the error variance, stop when
/// it has settled, otherwise flag and impute training outliers and repeat.
/// Non-convergence is reported through `converged`, not an exception.
CleaningResult run_cleaning(const TimeSeriesDataset& dataset, const PipelineConfig& config,
                            const ProgressFn& progress = {});

/// Scaler of the configured kind fitted on the training split.
Scaler fit_configured_scaler(const TimeSeriesDataset& dataset, const ModelConfig& model);

}  // namespace rcdm
