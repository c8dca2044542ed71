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

// Robustness gap Rob_rho(theta) = E_v[f(theta + rho v)] - f(theta), the
// perturbation evaluation suite, and the refusal-task ASR analog.

#ifndef ZOREFINE_EVALUATION_HPP_
#define ZOREFINE_EVALUATION_HPP_

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "zorefine/mlp.hpp"
#include "zorefine/objectives.hpp"
#include "zorefine/param_store.hpp"
#include "zorefine/perturbations.hpp"
#include "zorefine/rng.hpp"

namespace zorefine {

struct RobGapEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  double rho = 0.0;
  std::size_t n_samples = 0;
};

/// Monte Carlo Rob_rho with sample i drawn from key.stream(i). rho == 0
/// gives exactly zero. n_samples >= 2.
RobGapEstimate robustness_gap(const Objective& obj, const LayeredParams& params, double rho,
                              std::size_t n_samples, const RngKey& key, const Batch& batch = {});

/// Fraction of harmful-flagged rows the model predicts as kComply.
/// kInvalidArgument when the dataset has no harmful rows.
double asr_analog(const MlpObjective& model, const LayeredParams& params);

/// asr_analog of the model after applying `spec` with `key`.
double asr_analog(const MlpObjective& model, const LayeredParams& params, const PerturbSpec& spec,
                  const RngKey& key);

struct EvalConfig {
  std::vector<PerturbSpec> specs;
  /// Repeats averaged for stochastic specs; repeat r uses key.at_step(r).
  std::size_t n_repeats = 10;
  /// Monte Carlo samples behind each rob_gap column.
  std::size_t gap_samples = 64;
  /// rho of the rob_gap column for rows that are not weight noise.
  double default_rho = 0.05;
  /// Weight-noise levels are multiplied by this to get an absolute sigma.
  double weight_noise_unit = 1.0;

  void validate() const;
};

/// `spec` with its weight-noise sigma scaled by `unit`; other specs unchanged.
PerturbSpec scale_weight_noise(const PerturbSpec& spec, double unit);

struct RobustnessRow {
  std::string spec;
  double level = 0.0;
  double base_loss = 0.0;
  double perturbed_loss = 0.0;
  double delta_loss = 0.0;
  double rob_gap_mean = 0.0;
  double rob_gap_stderr = 0.0;
  double accuracy = 0.0;     // NaN for objectives without labels
  double asr_analog = 0.0;   // NaN for objectives without labels
  std::string error;         // non-empty when the row failed
};

/// One row per spec, in order. Failures are captured per row (metrics NaN,
/// `error` set) and the suite continues. Losses, accuracy and asr use `batch`
/// (every sample when empty and the objective has data).
std::vector<RobustnessRow> perturbed_eval_suite(const Objective& obj, const LayeredParams& params,
                                                const EvalConfig& cfg, const RngKey& key,
                                                const Batch& batch = {});

/// Columns: spec,level,base_loss,perturbed_loss,delta_loss,rob_gap_mean,
/// rob_gap_stderr,accuracy,asr_analog,error
void write_csv(const std::vector<RobustnessRow>& rows, std::ostream& out);

}  // namespace zorefine

#endif  // ZOREFINE_EVALUATION_HPP_
