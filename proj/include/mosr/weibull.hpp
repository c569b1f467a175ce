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


#ifndef MOSR_WEIBULL_HPP_
#define MOSR_WEIBULL_HPP_

#include <vector>

namespace mosr {

// Weibull law of the tail above `shift`:
// cdf(d) = 0 for d <= shift, else 1 - exp((shift/scale)^shape - (d/scale)^shape).
struct WeibullTail {
  double shape = 1.0;
  double scale = 1.0;
  double shift = 0.0;

  double Cdf(double d) const;
};

// Fits the `tail_size` largest values by maximum likelihood, treating them as
// a sample truncated at the next-largest value (or at 0 when every value is
// in the tail). Throws kFit when the tail has no spread.
WeibullTail FitWeibullTail(std::vector<double> values, int tail_size);

}  // namespace mosr

#endif  // MOSR_WEIBULL_HPP_
