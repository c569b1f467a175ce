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


#include "mosr/weibull.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <functional>
#include <limits>

#include "mosr/error.hpp"

namespace mosr {

double WeibullTail::Cdf(double d) const {
  if (!(d > shift)) return 0.0;
  const double z = std::pow(d / scale, shape) - std::pow(shift / scale, shape);
  return -std::expm1(-z);
}

WeibullTail FitWeibullTail(std::vector<double> values, int tail_size) {
  if (tail_size < 2) throw Error(ErrorKind::kFit, "tail_size must be at least 2");
  if (values.size() < static_cast<size_t>(tail_size)) {
    throw Error(ErrorKind::kFit, "need " + std::to_string(tail_size) + " values, got " +
                                     std::to_string(values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorKind::kFit, "values must be finite and non-negative");
  }
  std::sort(values.begin(), values.end(), std::greater<>());
  const std::vector<double> tail(values.begin(), values.begin() + tail_size);
  const double u = values.size() > tail.size() ? values[tail.size()] : 0.0;

  // Work in units of the largest value so powers stay representable.
  const double top = tail.front();
  const double spread = top - tail.back();
  if (!(top > 0.0) || spread <= 1e-12 * top) {
    throw Error(ErrorKind::kFit, "degenerate tail: values have no spread (minimum spread 1e-12 relative)");
  }
  std::vector<double> x(tail.size());
  double sum_log = 0.0;
  for (size_t i = 0; i < tail.size(); ++i) {
    x[i] = tail[i] / top;
    sum_log += std::log(x[i]);
  }
  const double us = u / top;
  const double n = static_cast<double>(x.size());

  // Profile log-likelihood in log(shape); scale^shape has a closed form.
  const auto theta = [&](double k) {
    const double uk = us > 0.0 ? std::pow(us, k) : 0.0;
    double s = 0.0;
    for (double xi : x) s += std::pow(xi, k) - uk;
    return s / n;
  };
  const auto neg_profile = [&](double log_k) {
    const double k = std::exp(log_k);
    const double t = theta(k);
    if (!(t > 0.0)) return std::numeric_limits<double>::infinity();
    return -(n * std::log(k) - n * std::log(t) + (k - 1.0) * sum_log - n);
  };
  const auto best = boost::math::tools::brent_find_minima(neg_profile, std::log(1e-2), std::log(1e3), 52);
  const double k = std::exp(best.first);
  const double t = theta(k);
  if (!std::isfinite(best.second) || !(t > 0.0)) throw Error(ErrorKind::kFit, "likelihood maximization failed");

  WeibullTail fit;
  fit.shape = k;
  fit.scale = std::pow(t, 1.0 / k) * top;
  fit.shift = u;
  return fit;
}

}  // namespace mosr
