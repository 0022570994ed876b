// SPDX-License-Identifier: Apache-2.0
#include "rcdm/quality.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rcdm/errors.hpp"

namespace rcdm {

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double outlier_probability_z(double z_abs, std::size_t samples) {
  if (samples == 0) throw ValidationError("outlier probability needs M >= 1");
  if (std::isnan(z_abs)) throw NumericError("outlier probability of a NaN distance");
  // 1 - 2 Phi(-z) = 1 - erfc(z / sqrt 2); log1p keeps precision when the base is near 1.
  const double tail = std::erfc(std::abs(z_abs) / std::numbers::sqrt2);
  if (tail >= 1.0) return 0.0;
  return std::exp(static_cast<double>(samples) * std::log1p(-tail));
}

double outlier_probability(double x, double mu, double sigma_t2, double sigma2, std::size_t samples) {
  const double var = sigma_t2 + sigma2;
  if (!(var > 0.0)) throw ValidationError("outlier probability: total predictive variance is zero");
  return outlier_probability_z(std::abs(x - mu) / std::sqrt(var), samples);
}

OutlierScore score_point(std::size_t index, double x, double mu, double sigma_t2, double sigma2, std::size_t samples,
                         double threshold) {
  const double var = sigma_t2 + sigma2;
  if (!(var > 0.0)) {
    throw ValidationError("outlier probability at index " + std::to_string(index) + ": total variance is zero");
  }
  OutlierScore s;
  s.index = index;
  s.z_abs = std::abs(x - mu) / std::sqrt(var);
  s.p_o = outlier_probability_z(s.z_abs, samples);
  s.flagged = classify(s.p_o, threshold);
  return s;
}

double qes(const QesInput& in) {
  if (in.span == 0) throw ValidationError("qes: empty evaluation span");
  if (!(in.k > 0.0 && in.k < 1.0)) throw ValidationError("qes: k must lie in (0, 1)");
  if (in.flagged > in.span) throw ValidationError("qes: more flagged points than scored points");
  if (in.probs.size() != in.flagged) throw ValidationError("qes: need one probability per flagged point");
  if (in.flagged == 0) return 1.0;
  const double a = std::min(1.0, static_cast<double>(in.flagged) / (in.k * static_cast<double>(in.span)));
  double sum = 0.0;
  for (double p : in.probs) sum += p;
  const double b = sum / static_cast<double>(in.flagged);
  if (a + b == 0.0) return 1.0;
  return 1.0 - 2.0 * a * b / (a + b);
}

Classification precision_recall_f1(const std::vector<bool>& flags, const std::vector<bool>& labels) {
  if (flags.size() != labels.size()) {
    throw ValidationError("precision/recall: " + std::to_string(flags.size()) + " predictions vs " +
                          std::to_string(labels.size()) + " labels");
  }
  Classification c;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] && labels[i]) ++c.tp;
    else if (flags[i]) ++c.fp;
    else if (labels[i]) ++c.fn;
  }
  const auto tp = static_cast<double>(c.tp);
  c.precision_undefined = c.tp + c.fp == 0;
  c.recall_undefined = c.tp + c.fn == 0;
  c.precision = c.precision_undefined ? 0.0 : tp / static_cast<double>(c.tp + c.fp);
  c.recall = c.recall_undefined ? 0.0 : tp / static_cast<double>(c.tp + c.fn);
  const double s = c.precision + c.recall;
  c.f1 = s > 0.0 ? 2.0 * c.precision * c.recall / s : 0.0;
  return c;
}

RegressionMetrics mse_lmae(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size()) throw ValidationError("mse/lmae: length mismatch");
  if (truth.empty()) throw ValidationError("mse/lmae: no points");
  std::string bad;
  std::size_t bad_count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!(truth[i] + 1.0 > 0.0) || !(predicted[i] + 1.0 > 0.0)) {
      if (bad_count < 20) bad += (bad.empty() ? "" : ", ") + std::to_string(i);
      ++bad_count;
    }
  }
  if (bad_count > 0) {
    throw ValidationError("lmae: log(y + 1) undefined at " + std::to_string(bad_count) + " indices: " + bad +
                          (bad_count > 20 ? ", ..." : ""));
  }
  RegressionMetrics m;
  m.count = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - predicted[i];
    m.mse += d * d;
    m.lmae += std::abs(std::log1p(truth[i]) - std::log1p(predicted[i]));
  }
  m.mse /= static_cast<double>(m.count);
  m.lmae /= static_cast<double>(m.count);
  return m;
}

}  // namespace rcdm
