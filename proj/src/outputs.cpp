// SPDX-License-Identifier: Apache-2.0
#include "rcdm/outputs.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "rcdm/errors.hpp"
#include "rcdm/quality.hpp"

namespace rcdm {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw ValidationError("failed writing " + path.string());
}

std::string ts(const TimeSeriesDataset& d, std::size_t i) { return format_timestamp(d.timestamps[i], d.timestamp_format); }

json metrics_json(const RegressionMetrics& m) { return {{"mse", m.mse}, {"lmae", m.lmae}, {"points", m.count}}; }

/// MSE/LMAE of an assessment's means against `truth` at `indices`; LMAE is
/// null when the log transform is undefined.
json forecast_json(const std::vector<std::size_t>& indices, const std::vector<double>& truth, const Scaler& scaler,
                   const Assessment& a, std::size_t context) {
  std::vector<double> y, yhat;
  for (auto t : indices) {
    y.push_back(truth[t]);
    yhat.push_back(scaler.unscale(a.predictions[t - context].mu));
  }
  if (y.empty()) return nullptr;
  try {
    return metrics_json(mse_lmae(y, yhat));
  } catch (const ValidationError&) {
    double mse = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) mse += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    return {{"mse", mse / static_cast<double>(y.size())}, {"lmae", nullptr}, {"points", y.size()}};
  }
}

}  // namespace

std::string provenance_line(const std::string& hash, std::uint64_t seed) {
  return "# rcdm config_hash=" + hash + " seed=" + std::to_string(seed);
}

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string format_fixed(double x, int decimals) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, decimals);
  return std::string(buf, r.ptr);
}

void write_series(const std::filesystem::path& path, const TimeSeriesDataset& d, const std::string& header) {
  auto out = open_out(path);
  out << header << '\n' << "timestamp,value";
  if (d.labels) out << ",label";
  if (d.clean) out << ",clean";
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << ts(d, i) << ',' << format_double(d.values[i]);
    if (d.labels) out << ',' << int((*d.labels)[i]);
    if (d.clean) out << ',' << format_double((*d.clean)[i]);
    out << '\n';
  }
  finish(out, path);
}

void write_cleaned(const std::filesystem::path& path, const CleaningResult& r, const std::string& header) {
  const auto& d = r.cleaned;
  const auto& last = r.last_scored().assessment;
  const std::size_t C = d.size() - last.scores.size();
  auto out = open_out(path);
  out << header << '\n' << "timestamp,value,imputed,outlier_probability\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << ts(d, i) << ',' << format_double(d.values[i]) << ',' << int(d.mask[i]) << ',';
    if (i >= C) out << format_fixed(last.scores[i - C].p_o, 6);
    out << '\n';
  }
  finish(out, path);
}

void write_low_quality(const std::filesystem::path& path, const CleaningResult& r, const std::string& header) {
  auto out = open_out(path);
  out << header << '\n' << "index,timestamp,original,imputed,in_training,p_o,p_o_flagged,iteration\n";
  for (const auto& p : r.low_quality) {
    out << p.index << ',' << format_timestamp(p.timestamp, r.cleaned.timestamp_format) << ','
        << format_double(p.original) << ',' << format_double(p.imputed) << ',' << int(p.in_training) << ','
        << format_fixed(p.p_o_final, 6) << ',' << format_fixed(p.p_o_flagged, 6) << ',' << p.iteration << '\n';
  }
  finish(out, path);
}

void write_predictions(const std::filesystem::path& path, const TimeSeriesDataset& d, const Scaler& scaler,
                       const Assessment& a, const std::string& header) {
  auto out = open_out(path);
  const double sigma2_raw = a.error.sigma2 * scaler.spread * scaler.spread;
  out << header << '\n' << "t,timestamp,mu_raw,sigma_raw,sigma2_raw\n";
  for (const auto& p : a.predictions) {
    out << p.index << ',' << ts(d, p.index) << ',' << format_double(scaler.unscale(p.mu)) << ','
        << format_double(scaler.unscale_std(p.sigma)) << ',' << format_double(sigma2_raw) << '\n';
  }
  finish(out, path);
}

void write_qes(const std::filesystem::path& path, const CleaningResult& r, const std::string& header) {
  auto out = open_out(path);
  out << header << '\n' << "iteration,qes,flagged,newly_flagged,imputed,sigma2,converged\n";
  for (const auto& it : r.iterations) {
    const auto& a = it.assessment;
    out << it.iteration << ',' << (a.scored ? format_double(a.qes) : "") << ','
        << (a.scored ? std::to_string(a.flagged) : "") << ',' << it.newly_flagged << ',' << it.imputed.size() << ',' << format_double(it.assessment.error.sigma2) << ','
        << int(it.converged) << '\n';
  }
  finish(out, path);
}

void write_loss_history(const std::filesystem::path& path, const CleaningResult& r, const std::string& header) {
  auto out = open_out(path);
  out << header << '\n' << "iteration,epoch,lr,mean_loss\n";
  for (const auto& it : r.iterations) {
    for (const auto& e : it.history) {
      out << it.iteration << ',' << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.mean_loss)
          << '\n';
    }
  }
  finish(out, path);
}

json point_records(const TimeSeriesDataset& d, const Scaler& scaler, const Assessment& a) {
  json rows = json::array();
  for (std::size_t k = 0; k < a.predictions.size(); ++k) {
    const auto& p = a.predictions[k];
    const double total = std::sqrt(p.sigma * p.sigma + a.error.sigma2);
    json row{{"t", p.index},
             {"timestamp", ts(d, p.index)},
             {"value", d.values[p.index]},
             {"mu", scaler.unscale(p.mu)},
             {"sigma_total", scaler.unscale_std(total)},
             {"p_o", nullptr},
             {"flagged", nullptr}};
    if (a.scored) {
      row["p_o"] = a.scores[k].p_o;
      row["flagged"] = a.scores[k].flagged;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json cleaning_metrics(const TimeSeriesDataset& original, const CleaningResult& r, const PipelineConfig& config) {
  const std::size_t C = config.model.context;
  const std::size_t n = original.size();
  const std::size_t train_size = r.cleaned.train_size;
  std::set<std::size_t> flagged;
  for (const auto& p : r.low_quality) flagged.insert(p.index);

  json m;
  m["low_quality_points"] = r.low_quality.size();
  m["scored_points"] = n - C;
  if (original.labels) {
    std::vector<bool> f, l;
    for (std::size_t t = C; t < n; ++t) {
      f.push_back(flagged.contains(t));
      l.push_back((*original.labels)[t] != 0);
    }
    const auto pr = precision_recall_f1(f, l);
    m["detection"] = {{"precision", pr.precision}, {"recall", pr.recall}, {"f1", pr.f1},
                      {"tp", pr.tp},           {"fp", pr.fp},         {"fn", pr.fn},
                      {"precision_undefined", pr.precision_undefined},
                      {"recall_undefined", pr.recall_undefined}};
  }

  // Test points excluding outliers: labeled ones when labels exist, otherwise
  // the ones the run flagged.
  std::vector<std::size_t> test;
  for (std::size_t t = std::max(train_size, C); t < n; ++t) {
    const bool outlier = original.labels ? (*original.labels)[t] != 0 : flagged.contains(t);
    if (!outlier) test.push_back(t);
  }
  m["test_forecast"] = {{"before", forecast_json(test, original.values, r.scaler, r.iterations.front().assessment, C)},
                        {"after", forecast_json(test, original.values, r.scaler, r.iterations.back().assessment, C)}};
  return m;
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

}  // namespace rcdm
