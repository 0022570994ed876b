// SPDX-License-Identifier: Apache-2.0
#include "rcdm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rcdm/errors.hpp"

namespace rcdm {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string_view rest(line);
  while (true) {
    const auto pos = rest.find(delimiter);
    fields.push_back(trim(rest.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return fields;
}

char detect_delimiter(const std::string& header) {
  for (char c : {',', '\t', ';', '|'}) {
    if (header.find(c) != std::string::npos) return c;
  }
  return ',';
}

bool parse_int(std::string_view s, long long& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

double parse_double(const std::string& s, std::size_t row) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    // from_chars rejects a leading '+', strtod handles it and other spellings.
    char* stop = nullptr;
    v = std::strtod(s.c_str(), &stop);
    if (s.empty() || stop != s.c_str() + s.size()) {
      throw ValidationError("row " + std::to_string(row) + ": cannot parse value '" + s + "'");
    }
  }
  if (!std::isfinite(v)) {
    throw ValidationError("row " + std::to_string(row) + ": non-finite value '" + s + "'");
  }
  return v;
}

}  // namespace

TimeSeriesDataset make_dataset(std::vector<std::int64_t> timestamps, std::vector<double> values) {
  if (timestamps.size() != values.size()) {
    throw ValidationError("timestamps and values differ in length");
  }
  if (values.empty()) throw ValidationError("empty series");
  TimeSeriesDataset d;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError("row " + std::to_string(i + 1) + ": non-finite value");
    }
  }
  if (timestamps.size() >= 2) {
    d.interval = timestamps[1] - timestamps[0];
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
      const auto step = timestamps[i] - timestamps[i - 1];
      if (step <= 0) {
        throw ValidationError("row " + std::to_string(i + 1) + ": timestamps not strictly increasing");
      }
      if (step != d.interval) {
        throw ValidationError("row " + std::to_string(i + 1) + ": non-uniform sampling interval (" +
                              std::to_string(step) + " s, expected " + std::to_string(d.interval) + " s)");
      }
    }
  }
  d.timestamps = std::move(timestamps);
  d.values = std::move(values);
  d.mask.assign(d.values.size(), 0);
  d.train_size = d.values.size();
  return d;
}

std::int64_t parse_timestamp(const std::string& text, TimestampFormat* format) {
  long long epoch = 0;
  if (parse_int(text, epoch)) {
    if (format) *format = TimestampFormat::kEpochSeconds;
    return epoch;
  }
  // YYYY-MM-DD[T| ]HH:MM[:SS][Z]
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int consumed = 0;
  const int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
  bool ok = false;
  if (n == 3 && text.size() == 10) {
    ok = true;
  } else if (n >= 6 && (sep == 'T' || sep == ' ')) {
    std::string_view rest(text.c_str() + consumed);
    if (!rest.empty() && rest.front() == ':') {
      int c2 = 0;
      if (std::sscanf(rest.data(), ":%2d%n", &s, &c2) != 1) rest = "?";
      else rest.remove_prefix(static_cast<std::size_t>(c2));
    }
    ok = rest.empty() || rest == "Z";
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ok || !ymd.ok() || h > 23 || mi > 59 || s > 59) {
    throw ValidationError("cannot parse timestamp '" + text + "'");
  }
  if (format) *format = TimestampFormat::kIso8601;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(std::int64_t epoch_seconds, TimestampFormat format) {
  if (format == TimestampFormat::kEpochSeconds) return std::to_string(epoch_seconds);
  using namespace std::chrono;
  const auto day_count = epoch_seconds >= 0 ? epoch_seconds / 86400 : -((-epoch_seconds + 86399) / 86400);
  const auto secs = epoch_seconds - day_count * 86400;
  const year_month_day ymd{sys_days{days{day_count}}};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(secs / 3600), static_cast<long long>(secs % 3600 / 60),
                static_cast<long long>(secs % 60));
  return buf;
}

DelimitedTable read_table(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string line;
  std::string header;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    header = line;
    break;
  }
  if (header.empty()) throw ValidationError("'" + path.string() + "': missing header row");
  const char delim = delimiter ? delimiter : detect_delimiter(header);
  DelimitedTable table;
  table.columns = split(header, delim);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto fields = split(line, delim);
    if (fields.size() != table.columns.size()) {
      throw ValidationError("row " + std::to_string(table.rows.size() + 1) + ": expected " +
                            std::to_string(table.columns.size()) + " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

std::optional<std::size_t> DelimitedTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns.begin());
}

double parse_number(const std::string& field, std::size_t row) { return parse_double(field, row); }

TimeSeriesDataset load_series(const std::filesystem::path& path, const LoadOptions& options) {
  const auto table = read_table(path, options.delimiter);
  const auto ts_col = table.column(options.timestamp_column);
  const auto value_col = table.column(options.value_column);
  if (!ts_col || !value_col) {
    throw ValidationError("'" + path.string() + "': header must contain columns '" + options.timestamp_column +
                          "' and '" + options.value_column + "'");
  }
  const auto label_col = table.column("label");
  const auto clean_col = table.column("clean");

  std::vector<std::int64_t> timestamps;
  std::vector<double> values;
  std::vector<std::uint8_t> labels;
  std::vector<double> clean;
  TimestampFormat format = TimestampFormat::kIso8601;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& fields = table.rows[r];
    const std::size_t row = r + 1;
    TimestampFormat row_format{};
    try {
      timestamps.push_back(parse_timestamp(fields[*ts_col], &row_format));
    } catch (const ValidationError& e) {
      throw ValidationError("row " + std::to_string(row) + ": " + e.what());
    }
    if (row == 1) format = row_format;
    values.push_back(parse_double(fields[*value_col], row));
    if (label_col) labels.push_back(parse_double(fields[*label_col], row) != 0.0 ? 1 : 0);
    if (clean_col) clean.push_back(parse_double(fields[*clean_col], row));
  }
  if (values.size() < std::max<std::size_t>(options.min_rows, 1)) {
    throw ValidationError("'" + path.string() + "': " + std::to_string(values.size()) +
                          " data rows, at least " + std::to_string(options.min_rows) + " required");
  }
  auto dataset = make_dataset(std::move(timestamps), std::move(values));
  dataset.timestamp_format = format;
  if (label_col) dataset.labels = std::move(labels);
  if (clean_col) dataset.clean = std::move(clean);
  return dataset;
}

void set_train_fraction(TimeSeriesDataset& dataset, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("train fraction must lie in (0, 1]");
  dataset.train_size = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(dataset.size())));
}

void impute(TimeSeriesDataset& dataset, std::size_t index, double value) {
  if (index >= dataset.train_size) {
    throw ValidationError("impute: index " + std::to_string(index) + " outside training split [0, " +
                          std::to_string(dataset.train_size) + ")");
  }
  dataset.values[index] = value;
  dataset.mask[index] = 1;
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Scaler fit_scaler(std::span<const double> train_values) {
  if (train_values.size() < 4) throw ValidationError("quartile scaler needs at least 4 training values");
  Scaler s;
  s.kind = ScalerKind::kQuartile;
  s.q25 = percentile(train_values, 0.25);
  s.q50 = percentile(train_values, 0.50);
  s.q75 = percentile(train_values, 0.75);
  if (!(s.q75 - s.q25 > 0.0)) {
    throw ValidationError("degenerate distribution: interquartile range of the training split is zero");
  }
  s.center = s.q50;
  s.spread = s.q75 - s.q25;
  return s;
}

Scaler fit_zscore_scaler(std::span<const double> train_values) {
  if (train_values.size() < 2) throw ValidationError("z-score scaler needs at least 2 training values");
  const double n = static_cast<double>(train_values.size());
  double mean = 0.0;
  for (double v : train_values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : train_values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw ValidationError("degenerate distribution: training split is constant");
  Scaler s;
  s.kind = ScalerKind::kZScore;
  s.q25 = percentile(train_values, 0.25);
  s.q50 = percentile(train_values, 0.50);
  s.q75 = percentile(train_values, 0.75);
  s.center = mean;
  s.spread = sd;
  return s;
}

TimeFeatures time_features(std::int64_t epoch_seconds, std::size_t index, std::size_t length) {
  using namespace std::chrono;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const sys_seconds tp{seconds{epoch_seconds}};
  const auto day = floor<days>(tp);
  const double sec_of_day = static_cast<double>((tp - day).count());
  const year_month_day ymd{day};
  const auto jan1 = sys_days{ymd.year() / January / 1};
  const double day_of_year = static_cast<double>((day - jan1).count());
  const double year_len = ymd.year().is_leap() ? 366.0 : 365.0;
  const double dow = static_cast<double>(weekday{day}.c_encoding());

  const double hour_phase = two_pi * sec_of_day / 86400.0;
  const double dow_phase = two_pi * dow / 7.0;
  const double doy_phase = two_pi * day_of_year / year_len;
  const double position = length > 1 ? static_cast<double>(index) / static_cast<double>(length - 1) : 0.0;
  return {std::sin(hour_phase), std::cos(hour_phase), std::sin(dow_phase), std::cos(dow_phase),
          std::sin(doy_phase),  std::cos(doy_phase),  position};
}

FeatureTable build_feature_table(const TimeSeriesDataset& dataset, const Scaler& scaler) {
  FeatureTable table;
  const auto n = dataset.size();
  table.scaled.resize(n);
  table.time.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    table.scaled[i] = scaler.scale(dataset.values[i]);
    table.time[i] = time_features(dataset.timestamps[i], i, n);
  }
  return table;
}

Eigen::VectorXd build_covariates(std::size_t t, const FeatureTable& table, std::size_t context) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(kTimeFeatures + context));
  unroll_covariate(t, context, table, context, out);
  return out;
}

Eigen::VectorXd build_covariates(std::size_t t, const TimeSeriesDataset& dataset, const Scaler& scaler,
                                 std::size_t context) {
  if (t < context || t >= dataset.size()) {
    throw ValidationError("build_covariates: index " + std::to_string(t) + " needs a full context window");
  }
  const auto n = dataset.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(kTimeFeatures + context));
  const auto tf = time_features(dataset.timestamps[t], t, n);
  for (std::size_t k = 0; k < kTimeFeatures; ++k) out[static_cast<Eigen::Index>(k)] = tf[k];
  for (std::size_t k = 0; k < context; ++k) {
    out[static_cast<Eigen::Index>(kTimeFeatures + k)] = scaler.scale(dataset.values[t - context + k]);
  }
  return out;
}

void unroll_covariate(std::size_t t, std::size_t step, const FeatureTable& table, std::size_t context,
                      Eigen::Ref<Eigen::VectorXd> out) {
  if (t < context || t >= table.size()) {
    throw ValidationError("covariates: index " + std::to_string(t) + " needs a full context window");
  }
  if (step < 1 || step > context) throw ValidationError("covariates: unroll step out of range");
  const auto& tf = table.time[t - context + step];
  for (std::size_t k = 0; k < kTimeFeatures; ++k) out[static_cast<Eigen::Index>(k)] = tf[k];
  const std::size_t first = t - context;
  for (std::size_t k = 0; k < context; ++k) {
    out[static_cast<Eigen::Index>(kTimeFeatures + k)] = k < step ? table.scaled[first + k] : 0.0;
  }
}

std::vector<Window> make_windows(const TimeSeriesDataset& dataset, const FeatureTable& table,
                                 std::size_t context) {
  const auto n = dataset.train_size;
  if (context == 0) throw ValidationError("context length must be positive");
  if (n < context + 1) {
    throw ValidationError("training split of " + std::to_string(n) + " points is shorter than C + 1 = " +
                          std::to_string(context + 1));
  }
  std::vector<Window> windows;
  windows.reserve(n - context);
  for (std::size_t t = context; t < n; ++t) {
    Window w;
    w.context.assign(table.scaled.begin() + static_cast<std::ptrdiff_t>(t - context),
                     table.scaled.begin() + static_cast<std::ptrdiff_t>(t));
    w.target = table.scaled[t];
    w.target_index = t;
    for (std::size_t k = t - context; k <= t; ++k) {
      if (dataset.mask[k]) {
        w.contains_imputed = true;
        break;
      }
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace rcdm
