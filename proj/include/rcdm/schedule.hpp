// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rcdm {

/// Per-step noise coefficients. beta is the noise standard deviation of a
/// single forward step, x^m = sqrt(1 - beta_m^2) x^{m-1} + beta_m eps, so the
/// cumulative coefficients satisfy alpha_bar^2 + beta_bar^2 = 1.
///
/// Arrays are indexed by step m = 0..T; entry 0 is the clean state
/// (alpha_bar = 1, beta_bar = 0) and beta[0] is unused.
class NoiseSchedule {
 public:
  /// Linear schedule between beta_min and beta_max. Requires T >= 2 and
  /// 0 <= beta_min < beta_max < 1.
  static NoiseSchedule linear(std::size_t steps, double beta_min, double beta_max);

  /// Schedule from an explicit beta_1..beta_T, each in [0, 1).
  static NoiseSchedule from_betas(std::span<const double> betas);

  std::size_t steps() const { return beta_.size() - 1; }
  double beta(std::size_t m) const { return beta_[m]; }
  double alpha(std::size_t m) const { return alpha_[m]; }  // sqrt(1 - beta_m^2)
  double alpha_bar(std::size_t m) const { return alpha_bar_[m]; }
  double beta_bar(std::size_t m) const { return beta_bar_[m]; }
  /// Standard deviation of x^{m-1} given (x^m, x^0): beta_bar_{m-1} beta_m / beta_bar_m, 0 at m = 1.
  double posterior_std(std::size_t m) const { return posterior_std_[m]; }
  /// Coefficient of the noise estimate in the reverse step, beta_m^2 / beta_bar_m.
  double eps_coefficient(std::size_t m) const { return eps_coef_[m]; }

 private:
  explicit NoiseSchedule(std::vector<double> betas_with_zero);

  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> beta_bar_;
  std::vector<double> posterior_std_;
  std::vector<double> eps_coef_;
};

/// beta_m = beta_min + (beta_max - beta_min) (m - 1) / (T - 1), m = 1..T. No range checks.
std::vector<double> linear_betas(std::size_t steps, double beta_min, double beta_max);

/// alpha_bar_m x0 + beta_bar_m eps.
double forward_diffuse(double x0, std::size_t m, double eps, const NoiseSchedule& schedule);

struct Gaussian1 {
  double mean = 0.0;
  double std = 0.0;
};

/// Closed-form q(x^{m-1} | x^m, x^0). At m = 1 the posterior collapses to x0.
Gaussian1 posterior_params(double xm, double x0, std::size_t m, const NoiseSchedule& schedule);

/// One ancestral sampling step from x^m to x^{m-1} given the noise estimate.
/// z must be 0 at m = 1.
double reverse_step(double xm, double eps_hat, std::size_t m, double z, const NoiseSchedule& schedule);

}  // namespace rcdm
