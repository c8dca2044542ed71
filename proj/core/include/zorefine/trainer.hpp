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

// Stage I first-order alignment and Stage III masked ZO refinement.

#ifndef ZOREFINE_TRAINER_HPP_
#define ZOREFINE_TRAINER_HPP_

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "zorefine/objectives.hpp"
#include "zorefine/param_store.hpp"
#include "zorefine/rng.hpp"
#include "zorefine/zo_estimator.hpp"

namespace zorefine {

enum class Scheduler { kConstantWithWarmup, kCosine, kConstant };

std::string to_string(Scheduler s);
/// Accepts "constant_with_warmup", "cosine", "constant".
Scheduler parse_scheduler(const std::string& text);

struct FoConfig {
  std::size_t steps = 100;
  double lr = 1e-2;
  double momentum = 0.0;
  Scheduler scheduler = Scheduler::kConstantWithWarmup;
  double warmup_ratio = 0.05;
  double weight_decay = 0.0;
  std::size_t batch_size = 8;

  void validate() const;
};

struct ZoRefineConfig {
  std::size_t steps = 10;
  double lr = 1e-2;
  ZoConfig zo;  // zo.mask is ignored; the mask is passed to zo_refine
  Scheduler scheduler = Scheduler::kCosine;
  double warmup_ratio = 0.0;
  double weight_decay = 1e-4;
  std::size_t batch_size = 8;

  void validate() const;
};

/// Learning rate at 0-based `step` of `total`. The warmup lasts
/// W = ceil(warmup_ratio * total) steps with lr * (s + 1) / W at step s.
double lr_at(std::size_t step, std::size_t total, double lr, Scheduler scheduler,
             double warmup_ratio);

/// batch_size indices drawn without replacement from [0, n), sorted.
/// Returns the full range when batch_size >= n and an empty batch when n == 0.
Batch sample_batch(std::size_t n, std::size_t batch_size, RandomStream& rng);

struct TrainResult {
  LayeredParams params;
  /// f(theta_t; xi_t) before update t.
  std::vector<double> loss_trace;
  bool aborted = false;
  std::string abort_reason;
};

/// Called after every update with the 0-based step and the new parameters.
using StepObserver = std::function<void(std::size_t, const LayeredParams&)>;

/// SGD with momentum: v <- mu v + g, theta <- theta - eta v - eta wd theta.
/// A non-finite loss or gradient stops training and sets `aborted`.
/// Batch t draws from key.with_purpose(kBatch).at_step(t).
TrainResult fo_align(const Objective& obj, const LayeredParams& params, const FoConfig& cfg,
                     const RngKey& key, const StepObserver& observer = {});

/// Masked ZO descent. Only selected layers move, with decoupled weight decay;
/// unselected blocks are never rewritten. Step t uses batch key
/// key.with_purpose(kBatch).at_step(t) and direction key
/// key.with_purpose(kZoDirection).at_step(t).
TrainResult zo_refine(const Objective& obj, const LayeredParams& params,
                      const ZoRefineConfig& cfg, const LayerMask& mask, const RngKey& key,
                      const StepObserver& observer = {});

}  // namespace zorefine

#endif  // ZOREFINE_TRAINER_HPP_
