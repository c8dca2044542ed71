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

#include "zorefine/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "zorefine/error.hpp"

namespace zorefine {
namespace {

void validate_common(std::size_t steps, double lr, double warmup_ratio,
                     double weight_decay, std::size_t batch_size, const char* stage) {
  const std::string tag(stage);
  if (steps > 0 && !(lr > 0.0 && std::isfinite(lr))) {
    throw Error(ErrorCode::kInvalidArgument, tag + " learning rate must be > 0");
  }
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, tag + " warmup_ratio must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, tag + " weight_decay must be >= 0");
  }
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, tag + " batch_size must be >= 1");
}

}  // namespace

std::string to_string(Scheduler s) {
  switch (s) {
    case Scheduler::kConstantWithWarmup: return "constant_with_warmup";
    case Scheduler::kCosine: return "cosine";
    case Scheduler::kConstant: return "constant";
  }
  return "unknown";
}

Scheduler parse_scheduler(const std::string& text) {
  if (text == "constant_with_warmup") return Scheduler::kConstantWithWarmup;
  if (text == "cosine") return Scheduler::kCosine;
  if (text == "constant") return Scheduler::kConstant;
  throw Error(ErrorCode::kInvalidArgument, "unknown scheduler '" + text + "'");
}

void FoConfig::validate() const {
  validate_common(steps, lr, warmup_ratio, weight_decay, batch_size, "fo");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fo momentum must lie in [0, 1)");
  }
}

void ZoRefineConfig::validate() const {
  validate_common(steps, lr, warmup_ratio, weight_decay, batch_size, "zo");
  zo.validate();
}

double lr_at(std::size_t step, std::size_t total, double lr, Scheduler scheduler,
             double warmup_ratio) {
  if (step >= total) throw Error(ErrorCode::kInvalidArgument, "step must be < total");
  if (scheduler == Scheduler::kConstant) return lr;
  // The epsilon keeps 0.05 * 100 from rounding up to 6.
  const auto warmup = static_cast<std::size_t>(
      std::ceil(warmup_ratio * static_cast<double>(total) - 1e-9));
  if (step < warmup) {
    return lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  if (scheduler == Scheduler::kConstantWithWarmup) return lr;
  return lr * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

Batch sample_batch(std::size_t n, std::size_t batch_size, RandomStream& rng) {
  if (n == 0) return {};
  if (batch_size >= n) return Batch::full(n);
  // Partial Fisher-Yates over the index range.
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(batch_size);
  std::sort(pool.begin(), pool.end());
  return Batch{std::move(pool)};
}

TrainResult fo_align(const Objective& obj, const LayeredParams& params, const FoConfig& cfg,
                     const RngKey& key, const StepObserver& observer) {
  cfg.validate();
  TrainResult result{params, {}, false, {}};
  if (cfg.steps == 0) return result;
  if (!obj.has_gradient()) {
    throw Error(ErrorCode::kGradUnavailable, "first-order alignment needs an analytic gradient");
  }
  result.loss_trace.reserve(cfg.steps);
  std::vector<double> theta = flatten(params);
  std::vector<double> velocity(theta.size(), 0.0);
  const RngKey batch_key = key.with_purpose(Purpose::kBatch);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    RandomStream rng = batch_key.at_step(static_cast<std::uint32_t>(t)).stream(0);
    const Batch batch = sample_batch(obj.num_samples(), cfg.batch_size, rng);
    const double loss = obj.value(result.params, batch);
    if (!std::isfinite(loss)) {
      result.aborted = true;
      result.abort_reason = "non-finite loss at fo step " + std::to_string(t);
      return result;
    }
    result.loss_trace.push_back(loss);
    const std::vector<double> grad = flatten(obj.gradient(result.params, batch));
    const double eta = lr_at(t, cfg.steps, cfg.lr, cfg.scheduler, cfg.warmup_ratio);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      velocity[i] = cfg.momentum * velocity[i] + grad[i];
      theta[i] = theta[i] - eta * velocity[i] - eta * cfg.weight_decay * theta[i];
    }
    result.params = unflatten(theta, params);
    if (!std::all_of(theta.begin(), theta.end(), [](double x) { return std::isfinite(x); })) {
      result.aborted = true;
      result.abort_reason = "non-finite parameters after fo step " + std::to_string(t);
      return result;
    }
    if (observer) observer(t, result.params);
  }
  return result;
}

TrainResult zo_refine(const Objective& obj, const LayeredParams& params,
                      const ZoRefineConfig& cfg, const LayerMask& mask, const RngKey& key,
                      const StepObserver& observer) {
  cfg.validate();
  TrainResult result{params, {}, false, {}};
  if (cfg.steps == 0) return result;
  if (!mask.bound_to(params)) {
    throw Error(ErrorCode::kShapeMismatch, "refinement mask is not bound to the parameters");
  }
  if (mask.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "refinement needs at least one selected layer");
  }
  ZoConfig zo = cfg.zo;
  zo.mask = mask;
  result.loss_trace.reserve(cfg.steps);
  const RngKey batch_key = key.with_purpose(Purpose::kBatch);
  const RngKey dir_key = key.with_purpose(Purpose::kZoDirection);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const auto step = static_cast<std::uint32_t>(t);
    RandomStream rng = batch_key.at_step(step).stream(0);
    const Batch batch = sample_batch(obj.num_samples(), cfg.batch_size, rng);
    try {
      const double loss = obj.value(result.params, batch);
      if (!std::isfinite(loss)) throw Error(ErrorCode::kNonFiniteLoss, "non-finite loss");
      result.loss_trace.push_back(loss);
      const LayeredParams g = zo_grad_estimate(obj, result.params, batch, zo, dir_key.at_step(step));
      const double eta = lr_at(t, cfg.steps, cfg.lr, cfg.scheduler, cfg.warmup_ratio);
      LayeredParams next = result.params;
      for (std::size_t l = 0; l < params.num_layers(); ++l) {
        if (!mask.contains(l)) continue;
        const auto theta = result.params.block(l);
        const auto grad = g.block(l);
        std::vector<double> updated(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) {
          updated[i] = theta[i] - eta * grad[i] - eta * cfg.weight_decay * theta[i];
        }
        next = next.with_block(l, std::move(updated));
      }
      result.params = std::move(next);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFiniteLoss) throw;
      result.aborted = true;
      result.abort_reason = "non-finite loss at zo step " + std::to_string(t);
      return result;
    }
    if (observer) observer(t, result.params);
  }
  return result;
}

}  // namespace zorefine
