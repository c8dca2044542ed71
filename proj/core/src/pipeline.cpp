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

#include "zorefine/pipeline.hpp"

#include "zorefine/error.hpp"
#include "zorefine/mlp.hpp"

namespace zorefine {
namespace {

template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw e.with_context(stage);
  }
}

void require_config(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kConfig, what);
}

std::size_t num_layers_of(const ObjectiveConfig& o) {
  switch (o.kind) {
    case ObjectiveKind::kMlp: return o.mlp.hidden.size() + 1;
    case ObjectiveKind::kQuadratic: return o.quadratic.layer_sizes.size();
    case ObjectiveKind::kCubicBump: return 1;
  }
  return 0;
}

}  // namespace

std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::kMlp: return "mlp";
    case ObjectiveKind::kQuadratic: return "quadratic";
    case ObjectiveKind::kCubicBump: return "cubic_bump";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(const std::string& text) {
  if (text == "mlp") return ObjectiveKind::kMlp;
  if (text == "quadratic") return ObjectiveKind::kQuadratic;
  if (text == "cubic_bump") return ObjectiveKind::kCubicBump;
  throw Error(ErrorCode::kConfig, "unknown objective kind '" + text + "'");
}

std::string to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::kRobust: return "robust";
    case SelectionStrategy::kSnip: return "snip";
    case SelectionStrategy::kWanda: return "wanda";
    case SelectionStrategy::kAll: return "all";
  }
  return "unknown";
}

SelectionStrategy parse_selection_strategy(const std::string& text) {
  if (text == "robust") return SelectionStrategy::kRobust;
  if (text == "snip") return SelectionStrategy::kSnip;
  if (text == "wanda") return SelectionStrategy::kWanda;
  if (text == "all") return SelectionStrategy::kAll;
  throw Error(ErrorCode::kConfig, "unknown selection strategy '" + text + "'");
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  for (const char* s : {"none", "quant:w4a16", "quant:w4a4", "wnoise:1", "wnoise:2",
                        "anoise:0.05", "anoise:0.08"}) {
    cfg.eval.specs.push_back(PerturbSpec::parse(s));
  }
  // Desk-scale weight-noise unit; layer scoring and ZO smoothing use the same scale.
  cfg.eval.weight_noise_unit = 0.05;
  cfg.sensitivity.rho = cfg.eval.weight_noise_unit;
  cfg.zo.zo.beta = cfg.eval.weight_noise_unit;
  cfg.zo.lr = 4e-2;
  return cfg;
}

void PipelineConfig::validate() const {
  try {
    fo.validate();
    zo.validate();
    sensitivity.validate();
    eval.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.detail());
  }
  const std::size_t layers = num_layers_of(objective);
  require_config(sensitivity.m >= 1 && sensitivity.m <= layers,
                 "sensitivity.m must lie in [1, " + std::to_string(layers) + "]");
  switch (objective.kind) {
    case ObjectiveKind::kMlp:
      require_config(objective.dataset.n >= 20, "dataset.n must be >= 20");
      require_config(objective.dataset.features >= 2, "dataset.features must be >= 2");
      require_config(!objective.mlp.hidden.empty(), "mlp.hidden needs at least one layer");
      for (std::size_t w : objective.mlp.hidden) require_config(w >= 1, "hidden widths must be >= 1");
      break;
    case ObjectiveKind::kQuadratic: {
      std::size_t total = 0;
      for (std::size_t s : objective.quadratic.layer_sizes) total += s;
      require_config(!objective.quadratic.diagonal.empty(), "quadratic.diagonal is empty");
      require_config(total == objective.quadratic.diagonal.size(),
                     "quadratic.layer_sizes must sum to the diagonal length");
      break;
    }
    case ObjectiveKind::kCubicBump:
      require_config(objective.cubic_bump.clip > 0.0, "cubic_bump.clip must be > 0");
      break;
  }
  require_config(!output_dir.empty(), "output_dir is empty");
}

RngKey stage_key(std::uint64_t seed, Purpose purpose) { return RngKey{seed, purpose, 0}; }

Problem make_problem(const PipelineConfig& cfg) {
  const ObjectiveConfig& o = cfg.objective;
  switch (o.kind) {
    case ObjectiveKind::kMlp: {
      auto data = std::make_shared<const Dataset>(make_refusal_dataset(
          cfg.seed, o.dataset.n, o.dataset.features, o.dataset.separation, o.dataset.margin));
      MlpSpec spec;
      spec.widths.push_back(o.dataset.features);
      for (std::size_t w : o.mlp.hidden) spec.widths.push_back(w);
      spec.widths.push_back(2);
      auto mlp = std::make_shared<const MlpObjective>(std::move(spec), data);
      LayeredParams init = mlp->initialize(stage_key(cfg.seed, Purpose::kInit));
      return {std::move(mlp), std::move(init)};
    }
    case ObjectiveKind::kQuadratic: {
      const QuadraticConfig& q = o.quadratic;
      auto quad = std::make_shared<const QuadraticObjective>(
          diagonal_quadratic(q.diagonal, q.layer_sizes, q.lipschitz_radius));
      std::vector<double> theta(q.diagonal.size(), q.init);
      LayeredParams init = unflatten(theta, quad->layout());
      return {std::move(quad), std::move(init)};
    }
    case ObjectiveKind::kCubicBump: {
      auto bump = std::make_shared<const CubicBumpObjective>(o.cubic_bump.a, o.cubic_bump.clip);
      return {std::move(bump), CubicBumpObjective::point(o.cubic_bump.init)};
    }
  }
  throw Error(ErrorCode::kConfig, "unknown objective kind");
}

Selection select_layers(const Objective& obj, const LayeredParams& params,
                        const PipelineConfig& cfg) {
  const Batch batch = obj.num_samples() > 0 ? Batch::full(obj.num_samples()) : Batch{};
  Selection out{LayerMask::none(params),
                score_layers(obj, params, batch, cfg.sensitivity,
                             stage_key(cfg.seed, Purpose::kNoiseSensitivity)),
                {},
                {}};
  if (obj.has_gradient()) out.snip = snip_layer_scores(obj, params, batch);
  if (obj.has_activations()) out.wanda = wanda_layer_scores(obj, params, batch);
  switch (cfg.selection) {
    case SelectionStrategy::kRobust:
      out.mask = out.sensitivity.selected;
      break;
    case SelectionStrategy::kSnip:
      if (out.snip.empty()) throw Error(ErrorCode::kGradUnavailable, "snip selection needs gradients");
      out.mask = top_m_layers(out.snip, cfg.sensitivity.m, params);
      break;
    case SelectionStrategy::kWanda:
      if (out.wanda.empty()) {
        throw Error(ErrorCode::kActivationsUnavailable, "wanda selection needs activations");
      }
      out.mask = top_m_layers(out.wanda, cfg.sensitivity.m, params);
      break;
    case SelectionStrategy::kAll:
      out.mask = LayerMask::all(params);
      break;
  }
  return out;
}

TrainResult run_stage1(const Objective& obj, const LayeredParams& initial,
                       const PipelineConfig& cfg) {
  return fo_align(obj, initial, cfg.fo, stage_key(cfg.seed, Purpose::kBatch));
}

TrainResult run_stage3(const Objective& obj, const LayeredParams& aligned, const LayerMask& mask,
                       const PipelineConfig& cfg) {
  return zo_refine(obj, aligned, cfg.zo, mask, stage_key(mix64(cfg.seed), Purpose::kZoDirection));
}

std::vector<RobustnessRow> run_evaluation(const Objective& obj, const LayeredParams& params,
                                          const PipelineConfig& cfg) {
  return perturbed_eval_suite(obj, params, cfg.eval, stage_key(cfg.seed, Purpose::kWeightNoise));
}

RunReport run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const Problem problem = in_stage("setup", [&] { return make_problem(cfg); });
  const Objective& obj = *problem.objective;

  TrainResult stage1 = in_stage("stage I", [&] { return run_stage1(obj, problem.initial, cfg); });
  if (stage1.aborted) throw Error(ErrorCode::kNonFiniteLoss, "stage I: " + stage1.abort_reason);

  Selection selection = in_stage("stage II", [&] { return select_layers(obj, stage1.params, cfg); });

  TrainResult stage3 = in_stage("stage III", [&] {
    return run_stage3(obj, stage1.params, selection.mask, cfg);
  });
  if (stage3.aborted) throw Error(ErrorCode::kNonFiniteLoss, "stage III: " + stage3.abort_reason);

  auto baseline = in_stage("evaluation", [&] { return run_evaluation(obj, stage1.params, cfg); });
  auto refined = in_stage("evaluation", [&] { return run_evaluation(obj, stage3.params, cfg); });
  return RunReport{cfg,
                   std::move(stage1),
                   std::move(selection),
                   std::move(stage3),
                   std::move(baseline),
                   std::move(refined)};
}

}  // namespace zorefine
