// SPDX-License-Identifier: Apache-2.0
#include "rcdm/networks.hpp"

#include <cmath>
#include <random>

#include "rcdm/errors.hpp"

namespace rcdm {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sigmoid(MatrixXd x) {
  sigmoid_inplace(x);
  return x;
}

MatrixXd tanh_of(MatrixXd x) {
  tanh_inplace(x);
  return x;
}

MatrixXd stack(const MatrixXd& top, const MatrixXd& bottom) {
  MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

struct CellOut {
  MatrixXd cat, cat_reset, r, z, g, h;
};

CellOut gru_cell(const GruLayer& l, const MatrixXd& h_prev, const MatrixXd& input) {
  const auto hidden = l.b_r.size();
  if (h_prev.rows() != hidden || l.w_r.cols() != hidden + input.rows()) {
    throw ValidationError("gru: input of width " + std::to_string(input.rows()) + " does not match layer of width " +
                          std::to_string(l.w_r.cols() - hidden));
  }
  CellOut c;
  c.cat = stack(h_prev, input);
  c.r = sigmoid((l.w_r * c.cat).colwise() + l.b_r);
  c.z = sigmoid((l.w_z * c.cat).colwise() + l.b_z);
  c.cat_reset = c.cat;
  c.cat_reset.topRows(hidden) = c.r.cwiseProduct(h_prev);
  c.g = tanh_of((l.w_h * c.cat_reset).colwise() + l.b_h);
  c.h = (1.0 - c.z.array()).matrix().cwiseProduct(h_prev) + c.z.cwiseProduct(c.g);
  return c;
}

void fill_normal(MatrixXd& m, std::size_t fan_in, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(gen) * scale;
}

void fill_normal(VectorXd& v, std::size_t fan_in, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(gen) * scale;
}

}  // namespace

void tanh_inplace(MatrixXd& x) { x = (1.0 - 2.0 / ((2.0 * x.array()).exp() + 1.0)).matrix(); }

void sigmoid_inplace(MatrixXd& x) { x = (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

ModelParams init_params(std::uint64_t seed, const ModelConfig& config) {
  if (config.denoiser_hidden == 0 || config.step_embedding == 0 || config.context == 0) {
    throw ValidationError("model dimensions must be positive");
  }
  if (config.conditional && (config.gru_layers == 0 || config.gru_hidden == 0)) {
    throw ValidationError("conditional model needs at least one GRU layer of positive width");
  }
  std::mt19937_64 gen(seed);
  ModelParams p;
  const auto hid = static_cast<Eigen::Index>(config.gru_hidden);
  if (config.conditional) {
    for (std::size_t i = 0; i < config.gru_layers; ++i) {
      const std::size_t in = i == 0 ? config.covariate_dim() : config.gru_hidden;
      const std::size_t fan_in = config.gru_hidden + in;
      GruLayer l;
      for (MatrixXd* w : {&l.w_r, &l.w_z, &l.w_h}) {
        w->resize(hid, static_cast<Eigen::Index>(fan_in));
        fill_normal(*w, fan_in, gen);
      }
      l.b_r = VectorXd::Zero(hid);
      l.b_z = VectorXd::Zero(hid);
      l.b_h = VectorXd::Zero(hid);
      p.gru.layers.push_back(std::move(l));
    }
  }
  auto& d = p.denoiser;
  const auto H = static_cast<Eigen::Index>(config.denoiser_hidden);
  const auto E = static_cast<Eigen::Index>(config.step_embedding);
  const std::size_t in_dim = 1 + config.step_embedding + config.condition_dim();
  d.w_step.resize(E, E);
  fill_normal(d.w_step, config.step_embedding, gen);
  d.b_step = VectorXd::Zero(E);
  d.w_in.resize(H, static_cast<Eigen::Index>(in_dim));
  fill_normal(d.w_in, in_dim, gen);
  d.b_in = VectorXd::Zero(H);
  for (std::size_t k = 0; k < config.residual_blocks; ++k) {
    ResidualBlock b;
    b.w1.resize(H, H);
    fill_normal(b.w1, config.denoiser_hidden, gen);
    b.b1 = VectorXd::Zero(H);
    b.w2.resize(H, H);
    fill_normal(b.w2, config.denoiser_hidden, gen);
    b.b2 = VectorXd::Zero(H);
    d.blocks.push_back(std::move(b));
  }
  d.w_out.resize(H);
  fill_normal(d.w_out, config.denoiser_hidden, gen);
  d.b_out = VectorXd::Zero(1);
  return p;
}

std::vector<BlockView> block_views(ModelParams& p) {
  std::vector<BlockView> views;
  for_each_block(p, [&](const std::string& name, auto& m) { views.push_back({name, m.data(), m.size()}); });
  return views;
}

std::vector<ConstBlockView> block_views(const ModelParams& p) {
  std::vector<ConstBlockView> views;
  for_each_block(p, [&](const std::string& name, const auto& m) { views.push_back({name, m.data(), m.size()}); });
  return views;
}

ModelParams zeros_like(const ModelParams& like) {
  ModelParams z = like;
  for_each_block(z, [](const std::string&, auto& m) { m.setZero(); });
  return z;
}

std::size_t parameter_count(const ModelParams& p) {
  std::size_t n = 0;
  for_each_block(p, [&](const std::string&, const auto& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

HiddenState zero_state(const ModelConfig& config) {
  return HiddenState(config.gru_layers, VectorXd::Zero(static_cast<Eigen::Index>(config.gru_hidden)));
}

HiddenState gru_forward(const VectorXd& covariate, const HiddenState& h_prev, const GruParams& p) {
  if (h_prev.size() != p.layers.size()) throw ValidationError("gru: hidden state has wrong layer count");
  HiddenState h(p.layers.size());
  MatrixXd input = covariate;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto c = gru_cell(p.layers[i], h_prev[i], input);
    h[i] = c.h.col(0);
    input = c.h;
  }
  return h;
}

VectorXd flatten(const HiddenState& h) {
  Eigen::Index n = 0;
  for (const auto& v : h) n += v.size();
  VectorXd out(n);
  Eigen::Index off = 0;
  for (const auto& v : h) {
    out.segment(off, v.size()) = v;
    off += v.size();
  }
  return out;
}

VectorXd step_encoding(std::size_t m, std::size_t dim) {
  VectorXd e(static_cast<Eigen::Index>(dim));
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    e[static_cast<Eigen::Index>(i)] = std::sin(static_cast<double>(m) * freq);
    e[static_cast<Eigen::Index>(half + i)] = std::cos(static_cast<double>(m) * freq);
  }
  if (dim % 2) e[static_cast<Eigen::Index>(dim - 1)] = static_cast<double>(m) / 1000.0;
  return e;
}

double denoiser_forward(double xm, const VectorXd& condition, std::size_t m, const DenoiserParams& p) {
  DenoiserBatch batch;
  Eigen::RowVectorXd x(1);
  x[0] = xm;
  return batch.forward(p, x, {m}, condition)[0];
}

double denoiser_forward(double xm, const HiddenState& h, std::size_t m, const DenoiserParams& p) {
  return denoiser_forward(xm, flatten(h), m, p);
}

// ---------------------------------------------------------------------------

void GruUnroll::forward(const GruParams& p, const std::vector<MatrixXd>& inputs) {
  layers_ = p.layers.size();
  if (layers_ == 0) throw ValidationError("gru: no layers");
  hidden_ = static_cast<std::size_t>(p.layers[0].b_r.size());
  const auto batch = inputs.empty() ? 0 : inputs[0].cols();
  std::vector<MatrixXd> h(layers_, MatrixXd::Zero(static_cast<Eigen::Index>(hidden_), batch));
  cache_.assign(inputs.size(), std::vector<StepCache>(layers_));
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    const MatrixXd* input = &inputs[j];
    for (std::size_t l = 0; l < layers_; ++l) {
      auto c = gru_cell(p.layers[l], h[l], *input);
      auto& sc = cache_[j][l];
      sc.h_prev = std::move(h[l]);
      sc.cat = std::move(c.cat);
      sc.cat_reset = std::move(c.cat_reset);
      sc.r = std::move(c.r);
      sc.z = std::move(c.z);
      sc.g = std::move(c.g);
      h[l] = std::move(c.h);
      input = &h[l];
    }
  }
  final_ = std::move(h);
}

MatrixXd GruUnroll::condition() const {
  const auto batch = final_.empty() ? 0 : final_[0].cols();
  MatrixXd out(static_cast<Eigen::Index>(layers_ * hidden_), batch);
  for (std::size_t l = 0; l < layers_; ++l) {
    out.middleRows(static_cast<Eigen::Index>(l * hidden_), static_cast<Eigen::Index>(hidden_)) = final_[l];
  }
  return out;
}

void GruUnroll::backward(const GruParams& p, const MatrixXd& d_condition, GruParams& grad) const {
  const auto H = static_cast<Eigen::Index>(hidden_);
  std::vector<MatrixXd> dh(layers_);
  for (std::size_t l = 0; l < layers_; ++l) dh[l] = d_condition.middleRows(static_cast<Eigen::Index>(l) * H, H);

  for (std::size_t j = cache_.size(); j-- > 0;) {
    std::vector<MatrixXd> dh_prev(layers_);
    for (std::size_t l = layers_; l-- > 0;) {
      const auto& c = cache_[j][l];
      const auto& w = p.layers[l];
      auto& gw = grad.layers[l];
      const MatrixXd& d = dh[l];

      const MatrixXd dz = d.cwiseProduct(c.g - c.h_prev);
      const MatrixXd dg = d.cwiseProduct(c.z);
      MatrixXd dhp = d.cwiseProduct((1.0 - c.z.array()).matrix());

      const MatrixXd da_g = dg.cwiseProduct((1.0 - c.g.array().square()).matrix());
      gw.w_h.noalias() += da_g * c.cat_reset.transpose();
      gw.b_h += da_g.rowwise().sum();
      const MatrixXd d_cat_reset = w.w_h.transpose() * da_g;

      const MatrixXd d_rh = d_cat_reset.topRows(H);
      MatrixXd d_input = d_cat_reset.bottomRows(d_cat_reset.rows() - H);
      const MatrixXd dr = d_rh.cwiseProduct(c.h_prev);
      dhp += d_rh.cwiseProduct(c.r);

      const MatrixXd da_r = dr.cwiseProduct(c.r.cwiseProduct((1.0 - c.r.array()).matrix()));
      const MatrixXd da_z = dz.cwiseProduct(c.z.cwiseProduct((1.0 - c.z.array()).matrix()));
      gw.w_r.noalias() += da_r * c.cat.transpose();
      gw.b_r += da_r.rowwise().sum();
      gw.w_z.noalias() += da_z * c.cat.transpose();
      gw.b_z += da_z.rowwise().sum();
      MatrixXd d_cat = w.w_r.transpose() * da_r;
      d_cat.noalias() += w.w_z.transpose() * da_z;
      dhp += d_cat.topRows(H);
      d_input += d_cat.bottomRows(d_cat.rows() - H);

      if (l > 0) dh[l - 1] += d_input;
      dh_prev[l] = std::move(dhp);
    }
    dh = std::move(dh_prev);
  }
}

Eigen::RowVectorXd DenoiserBatch::forward(const DenoiserParams& p, const Eigen::RowVectorXd& xm,
                                          const std::vector<std::size_t>& steps, const MatrixXd& condition) {
  const auto B = xm.cols();
  embed_ = static_cast<std::size_t>(p.w_step.rows());
  const auto E = static_cast<Eigen::Index>(embed_);
  if (static_cast<Eigen::Index>(steps.size()) != B || condition.cols() != B) {
    throw ValidationError("denoiser: batch sizes disagree");
  }
  if (p.w_in.cols() != 1 + E + condition.rows()) {
    throw ValidationError("denoiser: condition of width " + std::to_string(condition.rows()) +
                          " does not match the input projection");
  }
  enc_.resize(E, B);
  for (Eigen::Index b = 0; b < B; ++b) enc_.col(b) = step_encoding(steps[static_cast<std::size_t>(b)], embed_);
  input_.resize(1 + E + condition.rows(), B);
  input_.row(0) = xm;
  input_.middleRows(1, E) = (p.w_step * enc_).colwise() + p.b_step;
  input_.bottomRows(condition.rows()) = condition;

  const auto L = p.blocks.size();
  a_.resize(L + 1);
  u_.resize(L);
  a_[0] = (p.w_in * input_).colwise() + p.b_in;
  MatrixXd skip = MatrixXd::Zero(a_[0].rows(), B);
  for (std::size_t k = 0; k < L; ++k) {
    const auto& blk = p.blocks[k];
    u_[k] = tanh_of((blk.w1 * a_[k]).colwise() + blk.b1);
    MatrixXd v = (blk.w2 * u_[k]).colwise() + blk.b2;
    skip += v;
    a_[k + 1] = a_[k] + v;
  }
  y_ = a_[L] + skip;
  Eigen::RowVectorXd out = p.w_out.transpose() * y_;
  out.array() += p.b_out[0];
  return out;
}

MatrixXd DenoiserBatch::backward(const DenoiserParams& p, const Eigen::RowVectorXd& d_out,
                                 DenoiserParams& grad) const {
  const auto E = static_cast<Eigen::Index>(embed_);
  grad.w_out.noalias() += y_ * d_out.transpose();
  grad.b_out[0] += d_out.sum();
  const MatrixXd dy = p.w_out * d_out;
  // y = a_L + sum_k v_k and a_L = a_0 + sum_k v_k, so every v_k receives
  // dy through the skip sum plus the residual-stream gradient.
  MatrixXd da = dy;
  for (std::size_t k = p.blocks.size(); k-- > 0;) {
    const auto& blk = p.blocks[k];
    auto& g = grad.blocks[k];
    const MatrixXd dv = da + dy;
    g.w2.noalias() += dv * u_[k].transpose();
    g.b2 += dv.rowwise().sum();
    const MatrixXd dpre = (blk.w2.transpose() * dv).cwiseProduct((1.0 - u_[k].array().square()).matrix());
    g.w1.noalias() += dpre * a_[k].transpose();
    g.b1 += dpre.rowwise().sum();
    da.noalias() += blk.w1.transpose() * dpre;
  }
  grad.w_in.noalias() += da * input_.transpose();
  grad.b_in += da.rowwise().sum();
  const MatrixXd d_input = p.w_in.transpose() * da;
  const MatrixXd d_embed = d_input.middleRows(1, E);
  grad.w_step.noalias() += d_embed * enc_.transpose();
  grad.b_step += d_embed.rowwise().sum();
  return d_input.bottomRows(d_input.rows() - 1 - E);
}

}  // namespace rcdm
