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

#include "zorefine/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "zorefine/csv.hpp"
#include "zorefine/error.hpp"
#include "zorefine/mlp.hpp"
#include "zorefine/parallel.hpp"
#include "zorefine/perturbations.hpp"

namespace zorefine {
namespace {

double checked_value(const Objective& obj, const LayeredParams& p, const Batch& batch) {
  const double v = obj.value(p, batch);
  if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteLoss, "non-finite loss while scoring");
  return v;
}

}  // namespace

MonteCarloEstimate noise_sensitivity(const Objective& obj, const LayeredParams& params,
                                     std::size_t layer, double rho, std::size_t n_trials,
                                     const RngKey& key, const Batch& batch) {
  if (n_trials < 1) throw Error(ErrorCode::kInvalidArgument, "n_trials must be >= 1");
  if (!(rho > 0.0)) throw Error(ErrorCode::kInvalidArgument, "rho must be > 0");
  if (layer >= params.num_layers()) throw Error(ErrorCode::kInvalidArgument, "layer out of range");
  const double base = checked_value(obj, params, batch);
  const LayerMask only = LayerMask::of(params, {layer});
  std::vector<double> deltas(n_trials);
  parallel_for(n_trials, [&](std::size_t t) {
    RandomStream rng = key.stream(static_cast<std::uint32_t>(t));
    const LayeredParams v = sample_masked_direction(params, only, rng);
    deltas[t] = checked_value(obj, axpy(params, v, rho), batch) - base;
  });
  double mean = 0.0;
  for (double d : deltas) mean += d;
  mean /= static_cast<double>(n_trials);
  double std_err = 0.0;
  if (n_trials > 1) {
    double ss = 0.0;
    for (double d : deltas) ss += (d - mean) * (d - mean);
    std_err = std::sqrt(ss / static_cast<double>(n_trials - 1) / static_cast<double>(n_trials));
  }
  return {mean, std_err};
}

double quant_sensitivity(const Objective& obj, const LayeredParams& params,
                         std::size_t layer, int bits, const Batch& batch) {
  if (layer >= params.num_layers()) throw Error(ErrorCode::kInvalidArgument, "layer out of range");
  const LayeredParams quantized =
      params.with_block(layer, quantize_block(params.block(layer), bits));
  return checked_value(obj, quantized, batch) - checked_value(obj, params, batch);
}

double combined_score(double s_noise, double s_quant, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  return s_noise + lambda * s_quant;
}

LayerMask top_m_layers(std::span<const double> scores, std::size_t m,
                       const LayeredParams& shape) {
  if (scores.size() != shape.num_layers()) {
    throw Error(ErrorCode::kShapeMismatch, "one score per layer expected");
  }
  if (m < 1 || m > scores.size()) {
    throw Error(ErrorCode::kBadM, "m must lie in [1, " + std::to_string(scores.size()) + "]");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(m);
  return LayerMask::of(shape, order);
}

std::vector<double> minmax_normalize(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to normalize");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size(), 0.0);
  const double range = *hi - *lo;
  if (range == 0.0) return out;
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - *lo) / range;
  return out;
}

std::vector<double> snip_layer_scores(const Objective& obj, const LayeredParams& params,
                                      const Batch& batch) {
  if (!obj.has_gradient()) {
    throw Error(ErrorCode::kGradUnavailable, "SNIP scores need an analytic gradient");
  }
  const LayeredParams grad = obj.gradient(params, batch);
  std::vector<double> out(params.num_layers(), 0.0);
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const auto g = grad.block(l);
    const auto w = params.block(l);
    for (std::size_t i = 0; i < w.size(); ++i) out[l] += std::abs(g[i] * w[i]);
  }
  return out;
}

std::vector<double> wanda_layer_scores(const Objective& obj, const LayeredParams& params,
                                       const Batch& batch) {
  const auto* mlp = dynamic_cast<const MlpObjective*>(&obj);
  if (mlp == nullptr) {
    throw Error(ErrorCode::kActivationsUnavailable, "WANDA scores need layer activations");
  }
  const std::vector<Eigen::MatrixXd> inputs = mlp->layer_inputs(params, batch);
  const auto& widths = mlp->spec().widths;
  std::vector<double> out(params.num_layers(), 0.0);
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const std::size_t in = widths[l];
    const std::size_t rows = widths[l + 1];
    const Eigen::VectorXd col_norms = inputs[l].colwise().norm().transpose();
    const auto w = params.block(l);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < in; ++c) {
        out[l] += std::abs(w[r * in + c]) * col_norms(static_cast<Eigen::Index>(c));
      }
    }
  }
  return out;
}

void SensitivityConfig::validate() const {
  if (!(rho > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sensitivity rho must be > 0");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  if (n_trials < 1) throw Error(ErrorCode::kInvalidArgument, "n_trials must be >= 1");
  if (quant_bits < 2 || quant_bits > 8) {
    throw Error(ErrorCode::kInvalidArgument, "quant_bits must lie in [2, 8]");
  }
}

std::vector<double> SensitivityReport::combined() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.s_combined);
  return out;
}

SensitivityReport score_layers(const Objective& obj, const LayeredParams& params,
                               const Batch& batch, const SensitivityConfig& cfg,
                               const RngKey& key) {
  cfg.validate();
  const std::size_t num_layers = params.num_layers();
  std::vector<LayerSensitivity> rows(num_layers);
  // Layers run sequentially here; each noise_sensitivity call parallelizes
  // over its own trials.
  for (std::size_t l = 0; l < num_layers; ++l) {
    const MonteCarloEstimate noise = noise_sensitivity(
        obj, params, l, cfg.rho, cfg.n_trials, key.at_step(static_cast<std::uint32_t>(l)), batch);
    const double quant = quant_sensitivity(obj, params, l, cfg.quant_bits, batch);
    rows[l] = {params.id(l), noise.mean, noise.std_err, quant,
               combined_score(noise.mean, quant, cfg.lambda)};
  }
  SensitivityReport report{std::move(rows), cfg, LayerMask::none(params), {}};
  const std::vector<double> scores = report.combined();
  report.selected = top_m_layers(scores, cfg.m, params);
  report.normalized = minmax_normalize(scores);
  return report;
}

void write_csv(const SensitivityReport& report, std::ostream& out) {
  write_csv_row(out, {"layer_index", "layer_name", "s_noise", "s_quant", "s_combined",
                      "normalized", "selected"});
  for (std::size_t l = 0; l < report.rows.size(); ++l) {
    const auto& r = report.rows[l];
    write_csv_row(out, {std::to_string(r.id.index), r.id.name, format_double(r.s_noise),
                        format_double(r.s_quant), format_double(r.s_combined),
                        format_double(report.normalized.at(l)),
                        report.selected.contains(l) ? "1" : "0"});
  }
}

std::size_t overlap(const LayerMask& a, const LayerMask& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < std::min(a.num_layers(), b.num_layers()); ++i) {
    n += (a.contains(i) && b.contains(i)) ? 1 : 0;
  }
  return n;
}

}  // namespace zorefine
