// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rcdm/dataset.hpp"

namespace rcdm {

/// Architecture and ablation switches. Everything that changes the shape or
/// meaning of the learned parameters lives here and enters the config hash.
struct ModelConfig {
  std::size_t context = 80;
  std::size_t steps = 140;
  double beta_min = 1e-4;
  double beta_max = 0.1;
  std::size_t gru_layers = 4;
  std::size_t gru_hidden = 30;
  std::size_t denoiser_hidden = 64;
  std::size_t residual_blocks = 8;
  std::size_t step_embedding = 32;
  bool conditional = true;  // recurrent conditional embedding; off = covariates fed directly
  bool huber = true;        // off = squared loss
  bool quartile = true;     // off = z-score normalization

  std::size_t covariate_dim() const { return context + kTimeFeatures; }
  std::size_t condition_dim() const { return conditional ? gru_layers * gru_hidden : covariate_dim(); }
};

struct GruLayer {
  Eigen::MatrixXd w_r, w_z, w_h;  // hidden x (hidden + input)
  Eigen::VectorXd b_r, b_z, b_h;
};

struct GruParams {
  std::vector<GruLayer> layers;
};

struct ResidualBlock {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

struct DenoiserParams {
  Eigen::MatrixXd w_step;  // step_embedding x step_embedding
  Eigen::VectorXd b_step;
  Eigen::MatrixXd w_in;  // hidden x (1 + step_embedding + condition_dim)
  Eigen::VectorXd b_in;
  std::vector<ResidualBlock> blocks;
  Eigen::VectorXd w_out;  // hidden
  Eigen::VectorXd b_out;  // size 1
};

/// Learnable weights of both networks. Gradient buffers and optimizer moments
/// use the same type.
struct ModelParams {
  GruParams gru;
  DenoiserParams denoiser;
};

/// Visits every parameter array in a fixed order as f(name, array).
template <class Params, class F>
void for_each_block(Params& p, F&& f) {
  for (std::size_t i = 0; i < p.gru.layers.size(); ++i) {
    auto& l = p.gru.layers[i];
    const std::string pre = "gru." + std::to_string(i) + ".";
    f(pre + "w_r", l.w_r);
    f(pre + "w_z", l.w_z);
    f(pre + "w_h", l.w_h);
    f(pre + "b_r", l.b_r);
    f(pre + "b_z", l.b_z);
    f(pre + "b_h", l.b_h);
  }
  auto& d = p.denoiser;
  f(std::string("denoiser.w_step"), d.w_step);
  f(std::string("denoiser.b_step"), d.b_step);
  f(std::string("denoiser.w_in"), d.w_in);
  f(std::string("denoiser.b_in"), d.b_in);
  for (std::size_t i = 0; i < d.blocks.size(); ++i) {
    auto& b = d.blocks[i];
    const std::string pre = "denoiser.block" + std::to_string(i) + ".";
    f(pre + "w1", b.w1);
    f(pre + "b1", b.b1);
    f(pre + "w2", b.w2);
    f(pre + "b2", b.b2);
  }
  f(std::string("denoiser.w_out"), d.w_out);
  f(std::string("denoiser.b_out"), d.b_out);
}

/// Contiguous storage of one parameter array.
struct BlockView {
  std::string name;
  double* data = nullptr;
  Eigen::Index size = 0;
};

struct ConstBlockView {
  std::string name;
  const double* data = nullptr;
  Eigen::Index size = 0;
};

/// Views of every parameter array, in for_each_block order.
std::vector<BlockView> block_views(ModelParams& p);
std::vector<ConstBlockView> block_views(const ModelParams& p);

/// Standard-normal weights scaled by 1/sqrt(fan_in), zero biases.
ModelParams init_params(std::uint64_t seed, const ModelConfig& config);

/// Same shapes as `like`, all zeros.
ModelParams zeros_like(const ModelParams& like);

std::size_t parameter_count(const ModelParams& p);

/// Hidden state of every layer, h[layer] of width gru_hidden.
using HiddenState = std::vector<Eigen::VectorXd>;

HiddenState zero_state(const ModelConfig& config);

/// One recurrent step. Layer 1 reads [h_prev^1 ; c_t], layer i > 1 reads
/// [h_prev^i ; h_t^{i-1}]. The reset gate acts on the recurrent half.
HiddenState gru_forward(const Eigen::VectorXd& covariate, const HiddenState& h_prev, const GruParams& p);

/// Concatenation of all layers, the conditioning vector seen by the denoiser.
Eigen::VectorXd flatten(const HiddenState& h);

/// Elementwise activations through the vectorized exponential. They agree with
/// std::tanh and the logistic function to a few ulp.
void tanh_inplace(Eigen::MatrixXd& x);
void sigmoid_inplace(Eigen::MatrixXd& x);

/// Sinusoidal encoding of diffusion step m.
Eigen::VectorXd step_encoding(std::size_t m, std::size_t dim);

/// Noise estimate for a single input. `condition` is flatten(h) for the
/// conditional model and the raw covariate vector otherwise.
double denoiser_forward(double xm, const Eigen::VectorXd& condition, std::size_t m, const DenoiserParams& p);
double denoiser_forward(double xm, const HiddenState& h, std::size_t m, const DenoiserParams& p);

// ---------------------------------------------------------------------------
// Batched kernels with recorded activations, used by training and sampling.
// Columns of every matrix are batch items.

/// GRU unrolled over a sequence of covariate matrices, h_0 = 0.
class GruUnroll {
 public:
  /// inputs[j] is covariate_dim x batch for unroll step j.
  void forward(const GruParams& p, const std::vector<Eigen::MatrixXd>& inputs);
  /// Final-state conditioning, (layers * hidden) x batch.
  Eigen::MatrixXd condition() const;
  /// Accumulates parameter gradients given dLoss/dcondition.
  void backward(const GruParams& p, const Eigen::MatrixXd& d_condition, GruParams& grad) const;

 private:
  struct StepCache {
    Eigen::MatrixXd cat, cat_reset, r, z, g, h_prev;
  };
  std::size_t layers_ = 0;
  std::size_t hidden_ = 0;
  std::vector<std::vector<StepCache>> cache_;  // [step][layer]
  std::vector<Eigen::MatrixXd> final_;
};

class DenoiserBatch {
 public:
  /// xm: 1 x B, steps: B diffusion steps, condition: condition_dim x B. Returns 1 x B.
  Eigen::RowVectorXd forward(const DenoiserParams& p, const Eigen::RowVectorXd& xm,
                             const std::vector<std::size_t>& steps, const Eigen::MatrixXd& condition);
  /// Accumulates gradients; returns dLoss/dcondition.
  Eigen::MatrixXd backward(const DenoiserParams& p, const Eigen::RowVectorXd& d_out, DenoiserParams& grad) const;

 private:
  Eigen::MatrixXd enc_, input_;
  std::vector<Eigen::MatrixXd> a_, u_;  // a_[k] is the block-k input
  Eigen::MatrixXd y_;
  std::size_t embed_ = 0;
};

}  // namespace rcdm
