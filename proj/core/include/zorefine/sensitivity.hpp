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

// Layer-wise robustness sensitivity.
//
//   S_noise(l) = E_v[f(theta with theta_l + rho v_l)] - f(theta)
//   S_quant(l) = f(theta with Q(theta_l)) - f(theta)
//   S(l)       = S_noise(l) + lambda * S_quant(l)
//
// Scores keep their sign; the Top-m layers by S are refined. SNIP- and
// WANDA-style layer saliencies are provided as baselines for comparison.

#ifndef ZOREFINE_SENSITIVITY_HPP_
#define ZOREFINE_SENSITIVITY_HPP_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "zorefine/objectives.hpp"
#include "zorefine/param_store.hpp"
#include "zorefine/rng.hpp"
#include "zorefine/zo_estimator.hpp"

namespace zorefine {

/// S_noise for one layer; trial t draws from key.stream(t).
MonteCarloEstimate noise_sensitivity(const Objective& obj, const LayeredParams& params,
                                     std::size_t layer, double rho, std::size_t n_trials,
                                     const RngKey& key, const Batch& batch = {});

double quant_sensitivity(const Objective& obj, const LayeredParams& params,
                         std::size_t layer, int bits, const Batch& batch = {});

/// s_noise + lambda * s_quant; lambda >= 0.
double combined_score(double s_noise, double s_quant, double lambda);

/// The m largest scores, ties toward the lower layer index. kBadM unless
/// 1 <= m <= scores.size(); scores.size() must equal shape.num_layers().
LayerMask top_m_layers(std::span<const double> scores, std::size_t m,
                       const LayeredParams& shape);

/// (s - min) / (max - min); all-equal input maps to zeros.
std::vector<double> minmax_normalize(std::span<const double> scores);

/// Per layer sum_i |g_i * w_i| with g the analytic gradient on `batch`.
std::vector<double> snip_layer_scores(const Objective& obj, const LayeredParams& params,
                                      const Batch& batch);

/// Per layer sum over weights of |W_ij| * ||x_j||_2, where x_j is input
/// feature j of that layer over the probe batch. Biases do not contribute.
/// kActivationsUnavailable unless `obj` is an MlpObjective.
std::vector<double> wanda_layer_scores(const Objective& obj, const LayeredParams& params,
                                       const Batch& batch);

struct SensitivityConfig {
  double rho = 0.05;
  double lambda = 1.0;
  std::size_t n_trials = 8;
  std::size_t m = 4;
  int quant_bits = 4;

  void validate() const;
};

struct LayerSensitivity {
  LayerId id;
  double s_noise = 0.0;
  double s_noise_std_err = 0.0;
  double s_quant = 0.0;
  double s_combined = 0.0;
};

struct SensitivityReport {
  std::vector<LayerSensitivity> rows;
  SensitivityConfig config;
  LayerMask selected;
  std::vector<double> normalized;  // min-max of s_combined

  std::vector<double> combined() const;
};

/// Scores every layer (independently, possibly concurrently) and selects the
/// Top-m. Layer l uses key.at_step(l) for its noise trials.
SensitivityReport score_layers(const Objective& obj, const LayeredParams& params,
                               const Batch& batch, const SensitivityConfig& cfg,
                               const RngKey& key);

/// Columns: layer_index,layer_name,s_noise,s_quant,s_combined,normalized,selected
void write_csv(const SensitivityReport& report, std::ostream& out);

/// Number of layers two masks have in common.
std::size_t overlap(const LayerMask& a, const LayerMask& b);

}  // namespace zorefine

#endif  // ZOREFINE_SENSITIVITY_HPP_
