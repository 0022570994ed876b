// SPDX-License-Identifier: Apache-2.0
#include "rcdm/schedule.hpp"

#include <cmath>
#include <string>

#include "rcdm/errors.hpp"

namespace rcdm {
namespace {

void check_step(std::size_t m, const NoiseSchedule& s, const char* what) {
  if (m < 1 || m > s.steps()) {
    throw ValidationError(std::string(what) + ": step " + std::to_string(m) + " outside [1, " +
                          std::to_string(s.steps()) + "]");
  }
}

}  // namespace

std::vector<double> linear_betas(std::size_t steps, double beta_min, double beta_max) {
  std::vector<double> betas(steps);
  for (std::size_t m = 1; m <= steps; ++m) {
    const double frac = steps > 1 ? static_cast<double>(m - 1) / static_cast<double>(steps - 1) : 0.0;
    betas[m - 1] = beta_min + (beta_max - beta_min) * frac;
  }
  return betas;
}

NoiseSchedule NoiseSchedule::linear(std::size_t steps, double beta_min, double beta_max) {
  if (steps < 2) throw ValidationError("noise schedule needs T >= 2");
  if (!(beta_min >= 0.0 && beta_min < beta_max && beta_max < 1.0)) {
    throw ValidationError("noise schedule needs 0 <= beta_min < beta_max < 1");
  }
  const auto betas = linear_betas(steps, beta_min, beta_max);
  return from_betas(betas);
}

NoiseSchedule NoiseSchedule::from_betas(std::span<const double> betas) {
  if (betas.empty()) throw ValidationError("noise schedule needs at least one step");
  std::vector<double> with_zero{0.0};
  for (double b : betas) {
    if (!(b >= 0.0 && b < 1.0)) throw ValidationError("every beta must lie in [0, 1)");
    with_zero.push_back(b);
  }
  return NoiseSchedule(std::move(with_zero));
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas_with_zero) : beta_(std::move(betas_with_zero)) {
  const auto n = beta_.size();
  alpha_.assign(n, 1.0);
  alpha_bar_.assign(n, 1.0);
  beta_bar_.assign(n, 0.0);
  posterior_std_.assign(n, 0.0);
  eps_coef_.assign(n, 0.0);
  for (std::size_t m = 1; m < n; ++m) {
    alpha_[m] = std::sqrt(1.0 - beta_[m] * beta_[m]);
    alpha_bar_[m] = alpha_bar_[m - 1] * alpha_[m];
    // 1 - alpha_bar^2 cancels badly while alpha_bar is close to 1; the
    // recursion beta_bar_m^2 = alpha_m^2 beta_bar_{m-1}^2 + beta_m^2 does not.
    const double prev = beta_bar_[m - 1];
    beta_bar_[m] = std::sqrt(alpha_[m] * alpha_[m] * prev * prev + beta_[m] * beta_[m]);
    if (beta_bar_[m] > 0.0) {
      posterior_std_[m] = m == 1 ? 0.0 : beta_bar_[m - 1] * beta_[m] / beta_bar_[m];
      eps_coef_[m] = beta_[m] * beta_[m] / beta_bar_[m];
    }
  }
}

double forward_diffuse(double x0, std::size_t m, double eps, const NoiseSchedule& schedule) {
  check_step(m, schedule, "forward_diffuse");
  return schedule.alpha_bar(m) * x0 + schedule.beta_bar(m) * eps;
}

Gaussian1 posterior_params(double xm, double x0, std::size_t m, const NoiseSchedule& schedule) {
  check_step(m, schedule, "posterior_params");
  if (m == 1) return {x0, 0.0};
  const double bb2 = schedule.beta_bar(m) * schedule.beta_bar(m);
  const double b2 = schedule.beta(m) * schedule.beta(m);
  const double prev_bb2 = schedule.beta_bar(m - 1) * schedule.beta_bar(m - 1);
  const double mean =
      schedule.alpha_bar(m - 1) * b2 / bb2 * x0 + schedule.alpha(m) * prev_bb2 / bb2 * xm;
  return {mean, schedule.posterior_std(m)};
}

double reverse_step(double xm, double eps_hat, std::size_t m, double z, const NoiseSchedule& schedule) {
  check_step(m, schedule, "reverse_step");
  if (m == 1 && z != 0.0) throw ValidationError("reverse_step: z must be 0 at m = 1");
  return (xm - schedule.eps_coefficient(m) * eps_hat) / schedule.alpha(m) + schedule.posterior_std(m) * z;
}

}  // namespace rcdm
