// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rcdm {

enum class TimestampFormat { kEpochSeconds, kIso8601 };

/// Univariate, uniformly sampled series. Indices are 0-based throughout the
/// library: the first predictable point of a run with context length C is
/// index C, the training split is [0, train_size).
struct TimeSeriesDataset {
  std::vector<std::int64_t> timestamps;  // epoch seconds, UTC
  std::vector<double> values;            // raw sensor units
  std::vector<std::uint8_t> mask;        // 1 = value imputed by the pipeline
  std::optional<std::vector<std::uint8_t>> labels;  // ground truth, synthetic data
  std::optional<std::vector<double>> clean;         // noise-free signal, synthetic data
  std::int64_t interval = 0;                        // seconds between points
  std::size_t train_size = 0;
  TimestampFormat timestamp_format = TimestampFormat::kIso8601;

  std::size_t size() const { return values.size(); }
};

/// Validates timestamps/values and returns a dataset with an all-zero mask and
/// train_size equal to the full length.
TimeSeriesDataset make_dataset(std::vector<std::int64_t> timestamps, std::vector<double> values);

/// Header plus string fields of a delimiter-separated file; '#' lines skipped.
struct DelimitedTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::optional<std::size_t> column(const std::string& name) const;
};

/// delimiter '\0' detects one of , tab ; | from the header row.
DelimitedTable read_table(const std::filesystem::path& path, char delimiter = '\0');

/// Decimal field of data row `row` (1-based, used in the error message).
double parse_number(const std::string& field, std::size_t row);

struct LoadOptions {
  std::string timestamp_column = "timestamp";
  std::string value_column = "value";
  char delimiter = '\0';  // '\0' = detect from the header row
  std::size_t min_rows = 1;
};

/// Reads a delimiter-separated file with a header row. Lines starting with '#'
/// are metadata and skipped. Optional `label` and `clean` columns are kept;
/// other extra columns are ignored.
TimeSeriesDataset load_series(const std::filesystem::path& path, const LoadOptions& options = {});

/// Chronological split: the first floor(fraction * n) points train.
void set_train_fraction(TimeSeriesDataset& dataset, double fraction);

/// Writes `values[index]` and sets the mask bit. Only training points can be
/// imputed.
void impute(TimeSeriesDataset& dataset, std::size_t index, double value);

std::int64_t parse_timestamp(const std::string& text, TimestampFormat* format = nullptr);
std::string format_timestamp(std::int64_t epoch_seconds, TimestampFormat format);

enum class ScalerKind { kQuartile, kZScore };

/// Affine normalization y = (x - center) / spread. The quartile form centers
/// on the median and divides by the interquartile range; z-score is kept for
/// ablation runs only.
struct Scaler {
  ScalerKind kind = ScalerKind::kQuartile;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double center = 0.0;
  double spread = 1.0;

  double scale(double x) const { return (x - center) / spread; }
  double unscale(double y) const { return y * spread + center; }
  double unscale_std(double s) const { return s * spread; }
};

/// Percentile with linear interpolation between the closest order statistics.
double percentile(std::span<const double> values, double p);

Scaler fit_scaler(std::span<const double> train_values);
Scaler fit_zscore_scaler(std::span<const double> train_values);

inline constexpr std::size_t kTimeFeatures = 7;
using TimeFeatures = std::array<double, kTimeFeatures>;

/// (sin, cos) of hour-of-day, day-of-week and day-of-year phases, followed by
/// index / (length - 1).
TimeFeatures time_features(std::int64_t epoch_seconds, std::size_t index, std::size_t length);

/// Scaled values and calendar features for every index of a dataset snapshot.
struct FeatureTable {
  std::vector<double> scaled;
  std::vector<TimeFeatures> time;
  std::size_t size() const { return scaled.size(); }
};

FeatureTable build_feature_table(const TimeSeriesDataset& dataset, const Scaler& scaler);

/// Covariate vector for target index t: [time features of t ; scaled x_{t-C} .. x_{t-1}].
/// Requires t >= C.
Eigen::VectorXd build_covariates(std::size_t t, const FeatureTable& table, std::size_t context);
Eigen::VectorXd build_covariates(std::size_t t, const TimeSeriesDataset& dataset, const Scaler& scaler,
                                 std::size_t context);

/// Covariate consumed at unroll step j (1..C) of the window ending at target t:
/// time features of index t - C + j, lag slots holding x_{t-C} .. x_{t-C+j-1} and
/// zeros for values not yet observed at that step. Step C equals build_covariates(t).
void unroll_covariate(std::size_t t, std::size_t step, const FeatureTable& table, std::size_t context,
                      Eigen::Ref<Eigen::VectorXd> out);

struct Window {
  std::vector<double> context;  // scaled x_{t-C} .. x_{t-1}
  double target = 0.0;          // scaled x_t
  std::size_t target_index = 0;
  bool contains_imputed = false;  // any mask bit set in [t-C, t]
};

/// One window per training target t in [C, train_size): train_size - C windows.
std::vector<Window> make_windows(const TimeSeriesDataset& dataset, const FeatureTable& table,
                                 std::size_t context);

}  // namespace rcdm
