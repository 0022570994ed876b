// SPDX-License-Identifier: Apache-2.0
#include "rcdm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "rcdm/errors.hpp"
#include "rcdm/random.hpp"

namespace rcdm {
namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

constexpr std::size_t kPointsPerChunk = 16;

/// Runs many reverse chains at once. The step-embedding and conditioning parts
/// of the denoiser input projection are computed once instead of per call.
class ChainRunner {
 public:
  ChainRunner(const ModelParams& params, const NoiseSchedule& schedule) : p_(params.denoiser), s_(schedule) {
    const auto E = p_.w_step.rows();
    step_part_.resize(p_.w_in.rows(), static_cast<Eigen::Index>(s_.steps() + 1));
    step_part_.col(0).setZero();
    for (std::size_t m = 1; m <= s_.steps(); ++m) {
      const VectorXd e = p_.w_step * step_encoding(m, static_cast<std::size_t>(E)) + p_.b_step;
      step_part_.col(static_cast<Eigen::Index>(m)) = p_.w_in.middleCols(1, E) * e + p_.b_in;
    }
  }

  /// conditions: one column per chain group; each group runs `per_group`
  /// chains. draw(col) returns the next standard normal of chain `col`.
  template <class Draw>
  RowVectorXd run(const MatrixXd& conditions, std::size_t per_group, Draw&& draw) const {
    const auto E = p_.w_step.rows();
    const auto groups = conditions.cols();
    const auto n = groups * static_cast<Eigen::Index>(per_group);
    const MatrixXd cond_proj = p_.w_in.rightCols(p_.w_in.cols() - 1 - E) * conditions;
    MatrixXd base(p_.w_in.rows(), n);
    for (Eigen::Index g = 0; g < groups; ++g) {
      base.middleCols(g * static_cast<Eigen::Index>(per_group), static_cast<Eigen::Index>(per_group)) =
          cond_proj.col(g).replicate(1, static_cast<Eigen::Index>(per_group));
    }
    RowVectorXd x(n);
    for (Eigen::Index c = 0; c < n; ++c) x[c] = draw(c);

    MatrixXd a(base.rows(), n), u(base.rows(), n), v(base.rows(), n), skip(base.rows(), n);
    for (std::size_t m = s_.steps(); m >= 1; --m) {
      a = base;
      a.colwise() += step_part_.col(static_cast<Eigen::Index>(m));
      a.noalias() += p_.w_in.col(0) * x;
      skip.setZero();
      for (const auto& blk : p_.blocks) {
        u.noalias() = blk.w1 * a;
        u.colwise() += blk.b1;
        tanh_inplace(u);
        v.noalias() = blk.w2 * u;
        v.colwise() += blk.b2;
        skip += v;
        a += v;
      }
      a += skip;
      RowVectorXd eps_hat = p_.w_out.transpose() * a;
      eps_hat.array() += p_.b_out[0];
      const double coef = s_.eps_coefficient(m);
      const double inv_alpha = 1.0 / s_.alpha(m);
      const double post = s_.posterior_std(m);
      for (Eigen::Index c = 0; c < n; ++c) {
        double next = (x[c] - coef * eps_hat[c]) * inv_alpha;
        if (m > 1) next += post * draw(c);
        x[c] = next;
      }
      if (!x.allFinite()) throw NumericError("non-finite reverse-diffusion state at step " + std::to_string(m));
    }
    return x;
  }

 private:
  const DenoiserParams& p_;
  const NoiseSchedule& s_;
  MatrixXd step_part_;
};

struct ChainStream {
  std::mt19937_64 gen;
  std::normal_distribution<double> normal{0.0, 1.0};
};

}  // namespace

MatrixXd conditions_for(std::size_t first, std::size_t last, const FeatureTable& table, const ModelParams& params,
                        const ModelConfig& config) {
  const auto C = config.context;
  const auto P = static_cast<Eigen::Index>(last - first);
  const auto cov_dim = static_cast<Eigen::Index>(config.covariate_dim());
  if (!config.conditional) {
    MatrixXd out(cov_dim, P);
    for (Eigen::Index k = 0; k < P; ++k) unroll_covariate(first + static_cast<std::size_t>(k), C, table, C, out.col(k));
    return out;
  }
  std::vector<MatrixXd> inputs(C, MatrixXd(cov_dim, P));
  for (std::size_t j = 1; j <= C; ++j) {
    for (Eigen::Index k = 0; k < P; ++k) {
      unroll_covariate(first + static_cast<std::size_t>(k), j, table, C, inputs[j - 1].col(k));
    }
  }
  GruUnroll gru;
  gru.forward(params.gru, inputs);
  return gru.condition();
}

double sample_trajectory(const VectorXd& condition, const ModelParams& params, const NoiseSchedule& schedule,
                         std::mt19937_64& rng) {
  ChainRunner runner(params, schedule);
  std::normal_distribution<double> normal(0.0, 1.0);
  return runner.run(condition, 1, [&](Eigen::Index) { return normal(rng); })[0];
}

std::uint64_t sample_stream_seed(std::uint64_t seed, std::size_t index, std::size_t sample) {
  return derive_seed(seed, Stream::kPredict, index, sample);
}

PredictivePoint summarize_samples(std::size_t index, std::span<const double> samples, bool keep) {
  if (samples.size() < 2) throw ValidationError("predictive summary needs at least 2 samples");
  const double M = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double s : samples) sum += s;
  const double mu = sum / M;
  double ss = 0.0;
  for (double s : samples) ss += (s - mu) * (s - mu);
  PredictivePoint p;
  p.index = index;
  p.mu = mu;
  p.sigma = std::sqrt(ss / (M - 1.0));
  if (keep) p.samples.assign(samples.begin(), samples.end());
  return p;
}

PredictivePoint predict_point(std::size_t t, const FeatureTable& table, const ModelParams& params,
                              const ModelConfig& config, const NoiseSchedule& schedule, const SamplerOptions& options) {
  auto out = predict_range(t, t + 1, table, params, config, schedule, options);
  return std::move(out.front());
}

std::vector<PredictivePoint> predict_range(std::size_t first, std::size_t last, const FeatureTable& table,
                                           const ModelParams& params, const ModelConfig& config,
                                           const NoiseSchedule& schedule, const SamplerOptions& options) {
  if (options.samples < 2) throw ValidationError("prediction needs M >= 2 samples");
  if (first < config.context || last > table.size() || first > last) {
    throw ValidationError("prediction range [" + std::to_string(first) + ", " + std::to_string(last) +
                          ") needs full context windows inside the series");
  }
  const std::size_t M = options.samples;
  std::vector<PredictivePoint> out(last - first);
  const std::size_t chunks = (last - first + kPointsPerChunk - 1) / kPointsPerChunk;
  const ChainRunner runner(params, schedule);

  auto work = [&](std::size_t worker, std::size_t workers) {
    std::vector<ChainStream> streams;
    for (std::size_t chunk = worker; chunk < chunks; chunk += workers) {
      const std::size_t lo = first + chunk * kPointsPerChunk;
      const std::size_t hi = std::min(last, lo + kPointsPerChunk);
      const MatrixXd cond = conditions_for(lo, hi, table, params, config);
      streams.clear();
      for (std::size_t t = lo; t < hi; ++t) {
        for (std::size_t i = 0; i < M; ++i) streams.push_back({std::mt19937_64(sample_stream_seed(options.seed, t, i))});
      }
      const RowVectorXd x0 = runner.run(cond, M, [&](Eigen::Index c) {
        auto& s = streams[static_cast<std::size_t>(c)];
        return s.normal(s.gen);
      });
      for (std::size_t t = lo; t < hi; ++t) {
        const auto off = static_cast<Eigen::Index>((t - lo) * M);
        out[t - first] = summarize_samples(t, std::span<const double>(x0.data() + off, M), options.keep_samples);
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, chunks));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

ErrorVariance estimate_error_variance(std::span<const double> residuals, std::size_t resample_count,
                                      double subset_fraction, std::uint64_t seed) {
  if (residuals.size() < 2) throw ValidationError("error variance needs at least 2 residuals");
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
    throw ValidationError("subset fraction must lie in (0, 1]");
  }
  if (resample_count == 0) throw ValidationError("resample count must be positive");
  const auto size = static_cast<std::size_t>(std::ceil(subset_fraction * static_cast<double>(residuals.size())));
  if (size < 2) throw ValidationError("residual subsets would hold fewer than 2 elements");

  std::mt19937_64 gen(derive_seed(seed, Stream::kResample));
  std::vector<double> subset;
  subset.reserve(size);
  double total = 0.0;
  for (std::size_t i = 0; i < resample_count; ++i) {
    subset.clear();
    std::sample(residuals.begin(), residuals.end(), std::back_inserter(subset), size, gen);
    double mean = 0.0;
    for (double r : subset) mean += r;
    mean /= static_cast<double>(size);
    double ss = 0.0;
    for (double r : subset) ss += (r - mean) * (r - mean);
    total += ss / static_cast<double>(size - 1);
  }
  return {total / static_cast<double>(resample_count), resample_count, subset_fraction};
}

PredictiveGaussian predictive_distribution(const PredictivePoint& point, const ErrorVariance& error) {
  const double variance = point.sigma * point.sigma + error.sigma2;
  if (!(variance > 0.0)) throw ValidationError("degenerate predictive distribution: zero total variance");
  return {point.mu, variance};
}

}  // namespace rcdm
