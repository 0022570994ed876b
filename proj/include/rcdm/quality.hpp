// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rcdm {

/// Standard normal CDF through erfc, accurate in both tails.
double standard_normal_cdf(double x);

/// Probability that all M draws from N(mu, sigma_t2 + sigma2) land closer to
/// mu than x does: (1 - 2 Phi(-|x - mu| / sd))^M.
double outlier_probability(double x, double mu, double sigma_t2, double sigma2, std::size_t samples);

/// Same quantity from the standardized distance.
double outlier_probability_z(double z_abs, std::size_t samples);

struct OutlierScore {
  std::size_t index = 0;
  double p_o = 0.0;
  double z_abs = 0.0;
  bool flagged = false;
};

OutlierScore score_point(std::size_t index, double x, double mu, double sigma_t2, double sigma2, std::size_t samples,
                         double threshold = 0.5);

/// Strict inequality: p_o == threshold is not an outlier.
inline bool classify(double p_o, double threshold = 0.5) { return p_o > threshold; }

struct QesInput {
  std::size_t flagged = 0;  // Q
  std::size_t span = 0;     // number of scored points
  double k = 0.1;
  std::vector<double> probs;  // p_o of the Q flagged points
};

/// 1 - 2ab / (a + b), a = min(1, Q / (k span)), b = mean flagged p_o; 1 when Q = 0.
double qes(const QesInput& input);

struct Classification {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
};

Classification precision_recall_f1(const std::vector<bool>& flags, const std::vector<bool>& labels);

struct RegressionMetrics {
  double mse = 0.0;
  double lmae = 0.0;
  std::size_t count = 0;
};

/// Mean squared error and mean |log(y + 1) - log(yhat + 1)|. Throws if any
/// y + 1 or yhat + 1 is not positive, listing the offending indices.
RegressionMetrics mse_lmae(std::span<const double> truth, std::span<const double> predicted);

}  // namespace rcdm
