// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "rcdm/errors.hpp"
#include "rcdm/quality.hpp"

using namespace rcdm;

TEST_CASE("normal CDF against frozen high-precision values") {
  CHECK(std::abs(standard_normal_cdf(-3.0) - 0.0013498980316301) <= 1e-15);
  CHECK(std::abs(1.0 - 2.0 * standard_normal_cdf(-1.0) - 0.682689492137086) <= 1e-12);
  CHECK(standard_normal_cdf(0.0) == 0.5);
  // Deep tail keeps relative accuracy: Phi(-10) = 7.61985302416047e-24.
  CHECK(standard_normal_cdf(-10.0) == doctest::Approx(7.61985302416047e-24).epsilon(1e-12));
}

TEST_CASE("outlier probability examples") {
  CHECK(outlier_probability(2.0, 2.0, 0.3, 0.1, 100) == 0.0);
  CHECK(outlier_probability_z(1.0, 1) == doctest::Approx(0.682689492137086).epsilon(1e-12));
  CHECK(outlier_probability_z(3.0, 100) == doctest::Approx(0.763116396).epsilon(1e-8));
  CHECK(std::abs(outlier_probability_z(3.0, 100) - 0.7633) <= 5e-4);
  CHECK(outlier_probability_z(0.5, 10) == doctest::Approx(6.77854263335187e-5).epsilon(1e-10));
  // Distance enters through |x - mu| / sqrt(sigma_t^2 + sigma^2): 3-4-5.
  CHECK(outlier_probability(15.0, 0.0, 9.0, 16.0, 100) == outlier_probability_z(3.0, 100));
  CHECK(outlier_probability(-15.0, 0.0, 9.0, 16.0, 100) == outlier_probability_z(3.0, 100));
}

TEST_CASE("outlier probability argument checks") {
  CHECK_THROWS_AS(outlier_probability(1.0, 0.0, 0.0, 0.0, 10), ValidationError);
  CHECK_THROWS_AS(outlier_probability_z(1.0, 0), ValidationError);
  CHECK_THROWS_AS(outlier_probability_z(std::numeric_limits<double>::quiet_NaN(), 10), NumericError);
  CHECK_THROWS_AS(score_point(4, 1.0, 0.0, 0.0, 0.0, 10), ValidationError);
}

TEST_CASE("outlier probability agrees with a Monte-Carlo oracle") {
  for (double z : {0.5, 1.0, 2.0, 3.0}) {
    for (std::size_t M : {std::size_t{1}, std::size_t{10}, std::size_t{100}}) {
      const double mc = test::outlier_probability_mc(z, M, 100000, 17 + M);
      INFO("z = " << z << ", M = " << M);
      CHECK(std::abs(mc - outlier_probability_z(z, M)) <= 0.01);
    }
  }
}

TEST_CASE("outlier probability is monotone, bounded and tends to 1") {
  for (std::size_t M : {std::size_t{1}, std::size_t{10}, std::size_t{100}}) {
    double prev = outlier_probability_z(0.0, M);
    CHECK(prev == 0.0);
    for (double z = 0.05; z <= 8.0; z += 0.05) {
      const double p = outlier_probability_z(z, M);
      CHECK(p > prev);
      CHECK(p <= 1.0);
      prev = p;
    }
  }
  CHECK(outlier_probability_z(40.0, 100) == 1.0);
  // More samples make it harder for all of them to fall inside the radius,
  // so for z > 0 the probability falls as M grows.
  for (double z : {0.5, 1.0, 2.0, 3.0, 5.0}) {
    for (std::size_t M = 2; M <= 200; ++M) CHECK(outlier_probability_z(z, M) < outlier_probability_z(z, M - 1));
  }
}

TEST_CASE("scores carry distance, probability and flag") {
  const auto s = score_point(12, 15.0, 0.0, 9.0, 16.0, 1);
  CHECK(s.index == 12);
  CHECK(s.z_abs == 3.0);
  CHECK(s.p_o == outlier_probability_z(3.0, 1));
  CHECK(s.flagged);
  CHECK_FALSE(score_point(12, 0.1, 0.0, 9.0, 16.0, 1).flagged);
  CHECK_FALSE(score_point(12, 15.0, 0.0, 9.0, 16.0, 1, 0.999).flagged);
}

TEST_CASE("classification uses a strict threshold") {
  CHECK(classify(0.51));
  CHECK_FALSE(classify(0.5));
  CHECK_FALSE(classify(0.0));
  CHECK(classify(0.31, 0.3));
}

TEST_CASE("QES examples") {
  CHECK(qes({0, 1000, 0.1, {}}) == 1.0);
  // a = 20 / (0.1 * 1000) = 0.2, b = 0.8.
  CHECK(qes({20, 1000, 0.1, std::vector<double>(20, 0.8)}) == doctest::Approx(0.68).epsilon(1e-14));
  // a = b = 0.2.
  CHECK(qes({10, 500, 0.1, std::vector<double>(10, 0.2)}) == doctest::Approx(0.8).epsilon(1e-14));
  // a clamps at 1 once Q exceeds k * span.
  CHECK(qes({300, 1000, 0.1, std::vector<double>(300, 0.6)}) == doctest::Approx(1.0 - 1.2 / 1.6).epsilon(1e-14));
}

TEST_CASE("QES argument checks") {
  CHECK_THROWS_AS(qes({0, 0, 0.1, {}}), ValidationError);
  CHECK_THROWS_AS(qes({1, 10, 0.0, {0.9}}), ValidationError);
  CHECK_THROWS_AS(qes({1, 10, 1.0, {0.9}}), ValidationError);
  CHECK_THROWS_AS(qes({11, 10, 0.1, std::vector<double>(11, 0.9)}), ValidationError);
  CHECK_THROWS_AS(qes({2, 10, 0.1, {0.9}}), ValidationError);
}

TEST_CASE("QES stays in [0, 1] and falls as either term grows") {
  const std::size_t span = 1000;
  for (std::size_t Q = 1; Q <= 400; Q += 13) {
    for (double b = 0.51; b <= 1.0; b += 0.07) {
      const double v = qes({Q, span, 0.1, std::vector<double>(Q, b)});
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(qes({Q, span, 0.1, std::vector<double>(Q, std::min(1.0, b + 0.05))}) < v);
      if (Q + 13 <= 100) CHECK(qes({Q + 13, span, 0.1, std::vector<double>(Q + 13, b)}) < v);
    }
  }
}

TEST_CASE("precision, recall and F1") {
  std::vector<bool> flags, labels;
  auto add = [&](bool f, bool l, int n) {
    for (int i = 0; i < n; ++i) {
      flags.push_back(f);
      labels.push_back(l);
    }
  };
  add(true, true, 9);
  add(true, false, 1);
  add(false, true, 3);
  add(false, false, 20);
  const auto c = precision_recall_f1(flags, labels);
  CHECK(c.tp == 9);
  CHECK(c.fp == 1);
  CHECK(c.fn == 3);
  CHECK(c.precision == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(c.recall == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(c.f1 == doctest::Approx(0.8181818181818182).epsilon(1e-14));
  CHECK(c.f1 == 2.0 * c.precision * c.recall / (c.precision + c.recall));

  const auto perfect = precision_recall_f1(labels, labels);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  const auto none = precision_recall_f1(std::vector<bool>(labels.size(), false), labels);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK(none.precision_undefined);
  CHECK_FALSE(none.recall_undefined);

  CHECK_THROWS_AS(precision_recall_f1({true}, {true, false}), ValidationError);
}

TEST_CASE("MSE and LMAE") {
  const std::vector<double> y{1.0, 2.0, 3.0};
  const auto same = mse_lmae(y, y);
  CHECK(same.mse == 0.0);
  CHECK(same.lmae == 0.0);
  CHECK(same.count == 3);
  CHECK(mse_lmae(std::vector<double>{0.0}, std::vector<double>{std::exp(1.0) - 1.0}).lmae ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mse_lmae(std::vector<double>{1.0, 3.0}, std::vector<double>{2.0, 2.0}).mse == 1.0);
  try {
    mse_lmae(std::vector<double>{0.0, -1.0, -3.0}, std::vector<double>{0.0, 0.0, 0.0});
    FAIL("expected a log-domain error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("1, 2") != std::string::npos);
  }
  CHECK_THROWS_AS(mse_lmae(std::vector<double>{1.0}, std::vector<double>{}), ValidationError);
}
