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

// End-to-end driver: FO alignment, layer scoring and Top-m selection,
// masked ZO refinement, then the perturbation suite on both checkpoints.

#ifndef ZOREFINE_PIPELINE_HPP_
#define ZOREFINE_PIPELINE_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zorefine/evaluation.hpp"
#include "zorefine/objectives.hpp"
#include "zorefine/param_store.hpp"
#include "zorefine/sensitivity.hpp"
#include "zorefine/trainer.hpp"
#include "zorefine/verify.hpp"

namespace zorefine {

enum class ObjectiveKind { kMlp, kQuadratic, kCubicBump };
enum class SelectionStrategy { kRobust, kSnip, kWanda, kAll };

std::string to_string(ObjectiveKind k);
ObjectiveKind parse_objective_kind(const std::string& text);
std::string to_string(SelectionStrategy s);
SelectionStrategy parse_selection_strategy(const std::string& text);

struct DatasetConfig {
  std::size_t n = 800;
  std::size_t features = 8;
  double separation = 2.0;
  double margin = 0.25;
  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct MlpConfig {
  std::vector<std::size_t> hidden{16, 16, 16, 16, 16, 16};
  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

struct QuadraticConfig {
  std::vector<double> diagonal{4.0, 1.0};
  std::vector<std::size_t> layer_sizes{1, 1};
  std::optional<double> lipschitz_radius;
  double init = 1.0;  // every coordinate of theta_0
  friend bool operator==(const QuadraticConfig&, const QuadraticConfig&) = default;
};

struct CubicBumpConfig {
  double a = 0.5;
  double clip = 1.0;
  double init = 0.5;
  friend bool operator==(const CubicBumpConfig&, const CubicBumpConfig&) = default;
};

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::kMlp;
  DatasetConfig dataset;
  MlpConfig mlp;
  QuadraticConfig quadratic;
  CubicBumpConfig cubic_bump;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  ObjectiveConfig objective;
  FoConfig fo;
  ZoRefineConfig zo;
  SensitivityConfig sensitivity;
  SelectionStrategy selection = SelectionStrategy::kRobust;
  EvalConfig eval;
  VerifyConfig verify;
  std::string output_dir = "zorefine_out";

  /// Defaults used when a config document omits a field.
  static PipelineConfig defaults();
  /// kConfig on any invalid field, including m > number of layers.
  void validate() const;
};

/// An objective with its initial parameters.
struct Problem {
  std::shared_ptr<const Objective> objective;
  LayeredParams initial;
};

/// Builds the objective; MLP weights are initialized from RngKey(seed, kInit).
Problem make_problem(const PipelineConfig& cfg);

struct Selection {
  LayerMask mask;
  SensitivityReport sensitivity;
  std::vector<double> snip;   // empty when the objective has no gradient
  std::vector<double> wanda;  // empty when the objective has no activations
};

/// Stage II: robustness scores, SNIP/WANDA baselines, and the mask chosen by
/// cfg.selection. Scores use every sample of the objective's dataset.
Selection select_layers(const Objective& obj, const LayeredParams& params,
                        const PipelineConfig& cfg);

struct RunReport {
  PipelineConfig config;
  TrainResult stage1;
  Selection selection;
  TrainResult stage3;
  std::vector<RobustnessRow> baseline_robustness;  // stage-1 parameters
  std::vector<RobustnessRow> robustness;           // stage-3 parameters
};

/// Stage I from the initial parameters. Batches use stage_key(seed, kBatch).
TrainResult run_stage1(const Objective& obj, const LayeredParams& initial,
                       const PipelineConfig& cfg);

/// Stage III on `mask`. Keys derive from mix64(seed), so stage III does not
/// replay stage I's batch order.
TrainResult run_stage3(const Objective& obj, const LayeredParams& aligned, const LayerMask& mask,
                       const PipelineConfig& cfg);

/// Perturbation suite over every sample; repeats use stage_key(seed, kWeightNoise).
std::vector<RobustnessRow> run_evaluation(const Objective& obj, const LayeredParams& params,
                                          const PipelineConfig& cfg);

/// Runs every stage. Errors are rethrown with the stage name as context;
/// a non-finite loss during training is raised as kNonFiniteLoss.
RunReport run_pipeline(const PipelineConfig& cfg);

/// Key of each stage, derived from the run seed.
RngKey stage_key(std::uint64_t seed, Purpose purpose);

}  // namespace zorefine

#endif  // ZOREFINE_PIPELINE_HPP_
