// Copyright 2026 The zorefine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "zorefine/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "zorefine/error.hpp"

namespace zorefine {

double gaussian_expectation(const std::function<double(double)>& fn, std::size_t intervals,
                            double half_width) {
  if (intervals < 2 || !(half_width > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "quadrature needs >= 2 intervals and a positive range");
  }
  if (intervals % 2 == 1) ++intervals;
  const double h = 2.0 * half_width / static_cast<double>(intervals);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  double sum = 0.0;
  for (std::size_t i = 0; i <= intervals; ++i) {
    const double v = -half_width + h * static_cast<double>(i);
    const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * fn(v) * norm * std::exp(-0.5 * v * v);
  }
  return sum * h / 3.0;
}

}  // namespace zorefine
