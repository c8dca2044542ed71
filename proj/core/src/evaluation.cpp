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

#include "zorefine/evaluation.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <variant>

#include "zorefine/csv.hpp"
#include "zorefine/error.hpp"
#include "zorefine/parallel.hpp"

namespace zorefine {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double checked_value(const Objective& obj, const LayeredParams& p, const Batch& batch) {
  const double v = obj.value(p, batch);
  if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteLoss, "non-finite loss in evaluation");
  return v;
}

double asr_on(const MlpObjective& model, const LayeredParams& params,
              const std::vector<std::size_t>& harmful) {
  if (harmful.empty()) throw Error(ErrorCode::kInvalidArgument, "no harmful-flagged rows");
  std::size_t comply = 0;
  for (std::size_t row : harmful) comply += model.predict(params, row) == kComply ? 1 : 0;
  return static_cast<double>(comply) / static_cast<double>(harmful.size());
}

struct Metrics {
  double loss = 0.0;
  double accuracy = kNaN;
  double asr = kNaN;
};

Metrics measure(const Objective& obj, const Perturbation& p, const Batch& batch) {
  const auto* mlp = dynamic_cast<const MlpObjective*>(&obj);
  if (mlp == nullptr) return {checked_value(obj, p.params, batch), kNaN, kNaN};
  const MlpObjective model = p.model ? mlp->with_spec(*p.model) : *mlp;
  std::vector<std::size_t> harmful;
  for (std::size_t row : batch.indices) {
    if (model.data().harmful[row]) harmful.push_back(row);
  }
  return {checked_value(model, p.params, batch), model.accuracy(p.params, batch),
          asr_on(model, p.params, harmful)};
}

}  // namespace

RobGapEstimate robustness_gap(const Objective& obj, const LayeredParams& params, double rho,
                              std::size_t n_samples, const RngKey& key, const Batch& batch) {
  if (n_samples < 2) throw Error(ErrorCode::kInvalidArgument, "robustness_gap needs n_samples >= 2");
  if (!(rho >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "rho must be >= 0");
  if (rho == 0.0) return {0.0, 0.0, 0.0, n_samples};
  const double base = checked_value(obj, params, batch);
  const LayerMask all = LayerMask::all(params);
  std::vector<double> deltas(n_samples);
  parallel_for(n_samples, [&](std::size_t i) {
    RandomStream rng = key.stream(static_cast<std::uint32_t>(i));
    const LayeredParams v = sample_masked_direction(params, all, rng);
    deltas[i] = checked_value(obj, axpy(params, v, rho), batch) - base;
  });
  double mean = 0.0;
  for (double d : deltas) mean += d;
  mean /= static_cast<double>(n_samples);
  double ss = 0.0;
  for (double d : deltas) ss += (d - mean) * (d - mean);
  const double var = ss / static_cast<double>(n_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_samples)), rho, n_samples};
}

double asr_analog(const MlpObjective& model, const LayeredParams& params) {
  return asr_on(model, params, model.data().harmful_indices());
}

double asr_analog(const MlpObjective& model, const LayeredParams& params, const PerturbSpec& spec,
                  const RngKey& key) {
  const Perturbation p = apply(params, spec, model.spec(), key);
  return asr_analog(p.model ? model.with_spec(*p.model) : model, p.params);
}

void EvalConfig::validate() const {
  if (specs.empty()) throw Error(ErrorCode::kInvalidArgument, "evaluation needs at least one spec");
  if (n_repeats < 1) throw Error(ErrorCode::kInvalidArgument, "n_repeats must be >= 1");
  if (gap_samples < 2) throw Error(ErrorCode::kInvalidArgument, "gap_samples must be >= 2");
  if (!(default_rho >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "default_rho must be >= 0");
  if (!(weight_noise_unit > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "weight_noise_unit must be > 0");
  }
}

PerturbSpec scale_weight_noise(const PerturbSpec& spec, double unit) {
  if (const auto* w = std::get_if<WeightNoise>(&spec.kind())) {
    return PerturbSpec(WeightNoise{w->sigma * unit});
  }
  return spec;
}

std::vector<RobustnessRow> perturbed_eval_suite(const Objective& obj, const LayeredParams& params,
                                                const EvalConfig& cfg, const RngKey& key,
                                                const Batch& batch) {
  cfg.validate();
  const Batch eval_batch =
      batch.empty() && obj.num_samples() > 0 ? Batch::full(obj.num_samples()) : batch;
  const auto* mlp = dynamic_cast<const MlpObjective*>(&obj);
  const std::optional<MlpSpec> model =
      mlp != nullptr ? std::optional<MlpSpec>(mlp->spec()) : std::nullopt;
  const Metrics base = measure(obj, Perturbation{params, model}, eval_batch);

  std::vector<RobustnessRow> rows(cfg.specs.size());
  for (std::size_t s = 0; s < cfg.specs.size(); ++s) {
    const PerturbSpec& spec = cfg.specs[s];
    RobustnessRow& row = rows[s];
    row.spec = spec.to_string();
    row.level = spec.level();
    row.base_loss = base.loss;
    try {
      const PerturbSpec actual = scale_weight_noise(spec, cfg.weight_noise_unit);
      const std::size_t repeats = actual.is_stochastic() ? cfg.n_repeats : 1;
      std::vector<Metrics> runs(repeats);
      parallel_for(repeats, [&](std::size_t r) {
        const Perturbation p = apply(params, actual, model, key.at_step(static_cast<std::uint32_t>(r)));
        runs[r] = measure(obj, p, eval_batch);
      });
      Metrics sum{0.0, 0.0, 0.0};
      for (const auto& m : runs) {
        sum.loss += m.loss;
        sum.accuracy += m.accuracy;
        sum.asr += m.asr;
      }
      const double n = static_cast<double>(repeats);
      row.perturbed_loss = sum.loss / n;
      row.accuracy = sum.accuracy / n;
      row.asr_analog = sum.asr / n;
      row.delta_loss = row.perturbed_loss - row.base_loss;

      double rho = cfg.default_rho;
      if (const auto* w = std::get_if<WeightNoise>(&actual.kind())) rho = w->sigma;
      if (std::holds_alternative<NoPerturbation>(actual.kind())) rho = 0.0;
      const RobGapEstimate gap = robustness_gap(obj, params, rho, cfg.gap_samples,
                                                key.with_purpose(Purpose::kRobustnessGap),
                                                eval_batch);
      row.rob_gap_mean = gap.mean;
      row.rob_gap_stderr = gap.std_err;
    } catch (const Error& e) {
      row.perturbed_loss = row.delta_loss = row.rob_gap_mean = row.rob_gap_stderr = kNaN;
      row.accuracy = row.asr_analog = kNaN;
      row.error = e.what();
    }
  }
  return rows;
}

void write_csv(const std::vector<RobustnessRow>& rows, std::ostream& out) {
  write_csv_row(out, {"spec", "level", "base_loss", "perturbed_loss", "delta_loss", "rob_gap_mean",
                      "rob_gap_stderr", "accuracy", "asr_analog", "error"});
  for (const auto& r : rows) {
    write_csv_row(out, {r.spec, format_double(r.level), format_double(r.base_loss),
                        format_double(r.perturbed_loss), format_double(r.delta_loss),
                        format_double(r.rob_gap_mean), format_double(r.rob_gap_stderr),
                        format_double(r.accuracy), format_double(r.asr_analog), r.error});
  }
}

}  // namespace zorefine
