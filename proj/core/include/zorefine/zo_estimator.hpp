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

// Two-sided zeroth-order gradient estimation on masked layers.
//
// For a direction v (Gaussian on the selected layers, zero elsewhere) one
// sample is
//
//     g = c * (f(theta + beta v; xi) - f(theta - beta v; xi)) / (2 beta) * v
//
// with c = 1 (kGaussianUnit, unbiased for the gradient of the
// Gaussian-smoothed objective f_beta) or c = masked_dim (kDimScaled).

#ifndef ZOREFINE_ZO_ESTIMATOR_HPP_
#define ZOREFINE_ZO_ESTIMATOR_HPP_

#include <cstddef>
#include <vector>

#include "zorefine/objectives.hpp"
#include "zorefine/param_store.hpp"
#include "zorefine/rng.hpp"

namespace zorefine {

enum class ZoScaling { kGaussianUnit, kDimScaled };

struct ZoConfig {
  double beta = 1e-3;
  std::size_t samples_per_update = 8;
  ZoScaling scaling = ZoScaling::kGaussianUnit;
  LayerMask mask;

  /// kInvalidArgument unless beta > 0 and samples_per_update >= 1.
  void validate() const;
};

/// Single-sample estimate along a fixed direction. kNonFiniteLoss when either
/// side evaluation is NaN or infinite.
LayeredParams zo_estimate_along(const Objective& obj, const LayeredParams& params,
                                const Batch& batch, const LayeredParams& direction,
                                double beta, double scale = 1.0);

/// Average of cfg.samples_per_update estimates; sample i draws its direction
/// from key.stream(i). Every sample shares `batch`. The average is summed in
/// sample order, so the result does not depend on the thread count.
LayeredParams zo_grad_estimate(const Objective& obj, const LayeredParams& params,
                               const Batch& batch, const ZoConfig& cfg,
                               const RngKey& key);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_err = 0.0;
};

/// Monte Carlo estimate of f_beta(theta) = E_v[f(theta + beta v)], v ~ N(0, I).
/// beta == 0 returns f(theta) with zero standard error. n_samples >= 2.
MonteCarloEstimate smoothed_value(const Objective& obj, const LayeredParams& params,
                                  double beta, std::size_t n_samples, const RngKey& key,
                                  const Batch& batch = {});

struct EstimatorMoments {
  LayeredParams mean;
  /// Per-coordinate sample variance of the single-sample estimate.
  std::vector<double> coordinate_variance;
  /// Sample estimate of E||g - E g||^2.
  double total_variance = 0.0;
  std::size_t trials = 0;

  /// Standard error of mean coordinate i.
  double std_err(std::size_t i) const;
};

/// Moments of single-sample estimates (cfg.samples_per_update is ignored);
/// trial t uses key.stream(t). n_trials >= 100.
EstimatorMoments estimator_moments(const Objective& obj, const LayeredParams& params,
                                   const Batch& batch, const ZoConfig& cfg,
                                   std::size_t n_trials, const RngKey& key);

double scaling_factor(const ZoConfig& cfg);

}  // namespace zorefine

#endif  // ZOREFINE_ZO_ESTIMATOR_HPP_
