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

#ifndef ZOREFINE_QUADRATURE_HPP_
#define ZOREFINE_QUADRATURE_HPP_

#include <cstddef>
#include <functional>

namespace zorefine {

/// E[fn(v)] for v ~ N(0, 1) by composite Simpson over [-half_width, half_width].
/// `intervals` is rounded up to an even number.
double gaussian_expectation(const std::function<double(double)>& fn,
                            std::size_t intervals = 6000, double half_width = 12.0);

}  // namespace zorefine

#endif  // ZOREFINE_QUADRATURE_HPP_
