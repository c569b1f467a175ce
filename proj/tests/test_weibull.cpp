/*
 * Copyright 2026 The mosr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mosr/error.hpp"
#include "mosr/util.hpp"
#include "mosr/weibull.hpp"

namespace mosr {
namespace {

// Inverse-CDF draw from Weibull(shape, scale).
std::vector<double> DrawWeibull(Rng& rng, size_t n, double shape, double scale) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = scale * std::pow(-std::log1p(-u(rng)), 1.0 / shape);
  return out;
}

// Log-likelihood of the tail sample truncated below at u.
double TruncatedLogLik(const std::vector<double>& tail, double u, double k, double lambda) {
  double ll = 0.0;
  for (double x : tail) {
    ll += std::log(k) - k * std::log(lambda) + (k - 1.0) * std::log(x) - std::pow(x / lambda, k) +
          std::pow(u / lambda, k);
  }
  return ll;
}

TEST(WeibullTest, CdfShape) {
  const WeibullTail w{2.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(w.Cdf(0.0), 0.0);
  EXPECT_NEAR(w.Cdf(1.0), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR(w.Cdf(1e6), 1.0, 1e-15);
  const WeibullTail shifted{2.0, 1.0, 0.5};
  EXPECT_DOUBLE_EQ(shifted.Cdf(0.4), 0.0);
  EXPECT_NEAR(shifted.Cdf(1.0), 1.0 - std::exp(0.25 - 1.0), 1e-15);
}

TEST(WeibullTest, FullSampleRecoversShape) {
  Rng rng(3);
  const auto d = DrawWeibull(rng, 1000, 2.0, 1.0);
  const WeibullTail fit = FitWeibullTail(d, 1000);
  EXPECT_NEAR(fit.shape, 2.0, 0.3);
  EXPECT_NEAR(fit.scale, 1.0, 0.1);
  EXPECT_DOUBLE_EQ(fit.shift, 0.0);
}

// A 100-value tail of a 1000 draw carries little shape information, so
// single fits scatter widely; the estimator must still center on the truth.
TEST(WeibullTest, TailFitRecoversShapeOnAverage) {
  Rng rng(17);
  double sum = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) sum += FitWeibullTail(DrawWeibull(rng, 1000, 2.0, 1.0), 100).shape;
  EXPECT_NEAR(sum / reps, 2.0, 0.3);
}

TEST(WeibullTest, FitIsALocalLikelihoodMaximum) {
  Rng rng(21);
  auto d = DrawWeibull(rng, 500, 1.5, 3.0);
  const WeibullTail fit = FitWeibullTail(d, 60);
  std::sort(d.begin(), d.end(), std::greater<>());
  const std::vector<double> tail(d.begin(), d.begin() + 60);
  EXPECT_DOUBLE_EQ(fit.shift, d[60]);
  const double best = TruncatedLogLik(tail, fit.shift, fit.shape, fit.scale);
  for (double dk : {-0.05, 0.05}) {
    for (double dl : {-0.02, 0.0, 0.02}) {
      EXPECT_GE(best + 1e-9, TruncatedLogLik(tail, fit.shift, fit.shape * (1 + dk), fit.scale * (1 + dl)));
    }
  }
}

TEST(WeibullTest, ScaleEquivariance) {
  Rng rng(8);
  const auto d = DrawWeibull(rng, 300, 2.5, 1.0);
  std::vector<double> scaled = d;
  for (auto& v : scaled) v *= 1000.0;
  const WeibullTail a = FitWeibullTail(d, 40), b = FitWeibullTail(scaled, 40);
  EXPECT_NEAR(a.shape, b.shape, 1e-6 * a.shape);
  EXPECT_NEAR(b.scale, 1000.0 * a.scale, 1e-6 * b.scale);
}

TEST(WeibullTest, Errors) {
  EXPECT_THROW(FitWeibullTail({1, 2, 3}, 5), Error);
  EXPECT_THROW(FitWeibullTail(std::vector<double>(30, 0.0), 20), Error);
  EXPECT_THROW(FitWeibullTail(std::vector<double>(30, 4.2), 20), Error);
  EXPECT_THROW(FitWeibullTail({1, -2, 3}, 2), Error);
  try {
    FitWeibullTail(std::vector<double>(30, 0.0), 20);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFit);
    EXPECT_NE(std::string(e.what()).find("spread"), std::string::npos);
  }
}

}  // namespace
}  // namespace mosr
