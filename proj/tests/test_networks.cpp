// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "rcdm/errors.hpp"
#include "rcdm/networks.hpp"
#include "support.hpp"

using namespace rcdm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

GruLayer scalar_layer(double wr_h, double wr_x, double wz_h, double wz_x, double wh_h, double wh_x, double br,
                      double bz, double bh) {
  GruLayer l;
  l.w_r = MatrixXd{{wr_h, wr_x}};
  l.w_z = MatrixXd{{wz_h, wz_x}};
  l.w_h = MatrixXd{{wh_h, wh_x}};
  l.b_r = VectorXd::Constant(1, br);
  l.b_z = VectorXd::Constant(1, bz);
  l.b_h = VectorXd::Constant(1, bh);
  return l;
}

ModelConfig scalar_gru_model() {
  ModelConfig m;
  m.context = 1;
  m.gru_layers = 1;
  m.gru_hidden = 1;
  return m;
}

}  // namespace

TEST_CASE("vectorized activations agree with the reference functions") {
  MatrixXd x(1, 2001);
  for (Eigen::Index i = 0; i < x.cols(); ++i) x(0, i) = -30.0 + 0.03 * static_cast<double>(i);
  MatrixXd t = x, s = x;
  tanh_inplace(t);
  sigmoid_inplace(s);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    CHECK(std::abs(t(0, i) - std::tanh(x(0, i))) <= 1e-15);
    CHECK(std::abs(s(0, i) - logistic(x(0, i))) <= 1e-15);
  }
  MatrixXd big{{800.0, -800.0}};
  tanh_inplace(big);
  CHECK(big(0, 0) == 1.0);
  CHECK(big(0, 1) == -1.0);
}

TEST_CASE("GRU with all-zero weights keeps a zero state") {
  const auto m = test::tiny_model();
  auto p = zeros_like(init_params(1, m));
  VectorXd c = VectorXd::Random(static_cast<Eigen::Index>(m.covariate_dim()));
  const auto h = gru_forward(c, zero_state(m), p.gru);
  for (const auto& layer : h) CHECK(layer.isZero(0.0));
}

TEST_CASE("closed update gate carries the previous state") {
  const auto m = test::tiny_model();
  auto p = init_params(3, m);
  for (auto& l : p.gru.layers) l.b_z.setConstant(-1e4);
  HiddenState prev;
  for (std::size_t i = 0; i < m.gru_layers; ++i) prev.push_back(VectorXd::Random(static_cast<Eigen::Index>(m.gru_hidden)));
  const VectorXd c = VectorXd::Random(static_cast<Eigen::Index>(m.covariate_dim()));
  const auto h = gru_forward(c, prev, p.gru);
  for (std::size_t i = 0; i < m.gru_layers; ++i) CHECK((h[i] - prev[i]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("one-unit GRU matches a hand evaluation") {
  GruParams p;
  p.layers.push_back(scalar_layer(0.4, -0.7, 0.2, 0.9, -1.1, 0.5, 0.1, -0.3, 0.05));
  const double h0 = 0.6, x = 1.5;
  const double r = logistic(0.4 * h0 - 0.7 * x + 0.1);
  const double z = logistic(0.2 * h0 + 0.9 * x - 0.3);
  const double g = std::tanh(-1.1 * (r * h0) + 0.5 * x + 0.05);
  const double expect = (1.0 - z) * h0 + z * g;
  const auto h = gru_forward(VectorXd::Constant(1, x), HiddenState{VectorXd::Constant(1, h0)}, p);
  CHECK(h[0][0] == doctest::Approx(expect).epsilon(1e-14));

  // Second layer reads the first layer's fresh state.
  p.layers.push_back(scalar_layer(-0.2, 0.3, 0.7, -0.4, 0.8, 1.2, 0.0, 0.2, -0.1));
  const double h0b = -0.25;
  const double x2 = expect;
  const double r2 = logistic(-0.2 * h0b + 0.3 * x2);
  const double z2 = logistic(0.7 * h0b - 0.4 * x2 + 0.2);
  const double g2 = std::tanh(0.8 * (r2 * h0b) + 1.2 * x2 - 0.1);
  const auto hh = gru_forward(VectorXd::Constant(1, x),
                              HiddenState{VectorXd::Constant(1, h0), VectorXd::Constant(1, h0b)}, p);
  CHECK(hh[1][0] == doctest::Approx((1.0 - z2) * h0b + z2 * g2).epsilon(1e-14));
  CHECK(flatten(hh).size() == 2);
  CHECK(flatten(hh)[0] == hh[0][0]);
}

TEST_CASE("GRU states stay inside (-1, 1) from a zero start") {
  const auto m = test::tiny_model();
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal(0.0, 5.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = init_params(seed, m);
    auto h = zero_state(m);
    for (int step = 0; step < 50; ++step) {
      VectorXd c(static_cast<Eigen::Index>(m.covariate_dim()));
      for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = normal(gen);
      h = gru_forward(c, h, p.gru);
      for (const auto& layer : h) CHECK(layer.cwiseAbs().maxCoeff() < 1.0);
    }
  }
}

TEST_CASE("GRU rejects a mismatched input width") {
  auto m = scalar_gru_model();
  const auto p = init_params(0, m);
  CHECK_THROWS_AS(gru_forward(VectorXd::Zero(3), zero_state(m), p.gru), ValidationError);
}

TEST_CASE("batched GRU unroll matches repeated single steps") {
  const auto m = test::tiny_model();
  const auto p = init_params(17, m);
  const int B = 3;
  std::vector<MatrixXd> inputs;
  for (std::size_t j = 0; j < m.context; ++j) inputs.push_back(MatrixXd::Random(static_cast<Eigen::Index>(m.covariate_dim()), B));
  GruUnroll unroll;
  unroll.forward(p.gru, inputs);
  const MatrixXd cond = unroll.condition();
  for (int b = 0; b < B; ++b) {
    auto h = zero_state(m);
    for (const auto& in : inputs) h = gru_forward(in.col(b), h, p.gru);
    CHECK((flatten(h) - cond.col(b)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("zero denoiser predicts zero noise") {
  const auto m = test::tiny_model();
  const auto p = zeros_like(init_params(2, m));
  const VectorXd cond = VectorXd::Random(static_cast<Eigen::Index>(m.condition_dim()));
  for (std::size_t step = 1; step <= m.steps; ++step) CHECK(denoiser_forward(0.7, cond, step, p.denoiser) == 0.0);
}

TEST_CASE("denoiser with silent residual branches is affine in its input") {
  const auto m = test::tiny_model();
  auto p = init_params(4, m);
  for (auto& b : p.denoiser.blocks) {
    b.w2.setZero();
    b.b2.setZero();
  }
  p.denoiser.b_out[0] = 0.25;
  p.denoiser.b_in.setConstant(-0.1);
  const VectorXd cond = VectorXd::Random(static_cast<Eigen::Index>(m.condition_dim()));
  const std::size_t step = 3;
  const auto& d = p.denoiser;
  VectorXd in(1 + static_cast<Eigen::Index>(m.step_embedding + m.condition_dim()));
  in[0] = -1.2;
  in.segment(1, static_cast<Eigen::Index>(m.step_embedding)) = d.w_step * step_encoding(step, m.step_embedding) + d.b_step;
  in.tail(cond.size()) = cond;
  const double expect = d.w_out.dot(d.w_in * in + d.b_in) + d.b_out[0];
  CHECK(denoiser_forward(-1.2, cond, step, d) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("step encoding: sin/cos pairs of geometric frequencies") {
  const auto e = step_encoding(5, 4);
  CHECK(e[0] == doctest::Approx(std::sin(5.0)));
  CHECK(e[2] == doctest::Approx(std::cos(5.0)));
  CHECK(e[1] == doctest::Approx(std::sin(5.0 / 100.0)));
  CHECK(e[3] == doctest::Approx(std::cos(5.0 / 100.0)));
  CHECK(step_encoding(5, 4) != step_encoding(6, 4));
}

TEST_CASE("batched denoiser agrees with single evaluations") {
  const auto m = test::tiny_model();
  const auto p = init_params(5, m);
  const int B = 6;
  const MatrixXd cond = MatrixXd::Random(static_cast<Eigen::Index>(m.condition_dim()), B);
  const Eigen::RowVectorXd x = Eigen::RowVectorXd::Random(B);
  const std::vector<std::size_t> steps{1, 2, 5, 10, 7, 3};
  DenoiserBatch batch;
  const auto out = batch.forward(p.denoiser, x, steps, cond);
  for (int b = 0; b < B; ++b) {
    CHECK(out[b] == doctest::Approx(denoiser_forward(x[b], VectorXd(cond.col(b)), steps[static_cast<std::size_t>(b)], p.denoiser))
                        .epsilon(1e-13));
  }
  CHECK_THROWS_AS(batch.forward(p.denoiser, x, steps, MatrixXd::Zero(3, B)), ValidationError);
}

TEST_CASE("initialization is deterministic, scaled by fan-in, and biases start at zero") {
  ModelConfig m;
  m.context = 73;  // covariate width 80, first GRU layer fan-in 110
  const auto a = init_params(42, m);
  const auto b = init_params(42, m);
  const auto c = init_params(43, m);
  CHECK(a.gru.layers[0].w_r == b.gru.layers[0].w_r);
  CHECK(a.denoiser.w_out == b.denoiser.w_out);
  CHECK(a.gru.layers[0].w_r != c.gru.layers[0].w_r);
  const auto& w = a.gru.layers[0].w_h;
  REQUIRE(w.cols() == 110);
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().sum() / static_cast<double>(w.size() - 1));
  // 3300 draws: the sample sd sits within about 4 SE of 1/sqrt(110).
  const double target = 1.0 / std::sqrt(110.0);
  CHECK(std::abs(sd - target) <= 4.0 * target / std::sqrt(2.0 * static_cast<double>(w.size())));
  CHECK(a.gru.layers[0].b_z.isZero(0.0));
  CHECK(a.denoiser.b_in.isZero(0.0));
  CHECK(a.denoiser.b_out[0] == 0.0);
}

TEST_CASE("parameter count and block order") {
  const auto m = test::tiny_model();
  const auto p = init_params(0, m);
  const std::size_t cov = m.covariate_dim();
  const std::size_t gru = 3 * (5 * (5 + cov) + 5) + 3 * (5 * 10 + 5);
  const std::size_t in = 1 + 4 + 10;
  const std::size_t den = 16 + 4 + 8 * in + 8 + 2 * (2 * 64 + 2 * 8) + 8 + 1;
  CHECK(parameter_count(p) == gru + den);
  const auto views = block_views(p);
  CHECK(views.front().name == "gru.0.w_r");
  CHECK(views.back().name == "denoiser.b_out");

  auto flat = m;
  flat.conditional = false;
  const auto q = init_params(0, flat);
  CHECK(q.gru.layers.empty());
  CHECK(q.denoiser.w_in.cols() == static_cast<Eigen::Index>(1 + 4 + cov));
}
