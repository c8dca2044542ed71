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

#include "zorefine/zo_estimator.hpp"

#include <cmath>

#include "zorefine/error.hpp"
#include "zorefine/parallel.hpp"

namespace zorefine {
namespace {

constexpr std::size_t kChunk = 256;

double checked_value(const Objective& obj, const LayeredParams& p, const Batch& batch) {
  const double v = obj.value(p, batch);
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNonFiniteLoss, "objective returned a non-finite loss");
  }
  return v;
}

// Running mean / M2 per coordinate (Welford), mergeable with Chan's formula.
struct Moments {
  std::size_t n = 0;
  std::vector<double> mean;
  std::vector<double> m2;

  explicit Moments(std::size_t d) : mean(d, 0.0), m2(d, 0.0) {}

  void add(const std::vector<double>& x) {
    ++n;
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean[i];
      mean[i] += delta * inv;
      m2[i] += delta * (x[i] - mean[i]);
    }
  }

  void merge(const Moments& o) {
    if (o.n == 0) return;
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(o.n);
    const double total = na + nb;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double delta = o.mean[i] - mean[i];
      mean[i] += delta * nb / total;
      m2[i] += o.m2[i] + delta * delta * na * nb / total;
    }
    n += o.n;
  }
};

}  // namespace

void ZoConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kInvalidArgument, "ZO scale beta must be > 0");
  }
  if (samples_per_update < 1) {
    throw Error(ErrorCode::kInvalidArgument, "samples_per_update must be >= 1");
  }
}

double scaling_factor(const ZoConfig& cfg) {
  return cfg.scaling == ZoScaling::kDimScaled ? static_cast<double>(cfg.mask.masked_dim())
                                              : 1.0;
}

LayeredParams zo_estimate_along(const Objective& obj, const LayeredParams& params,
                                const Batch& batch, const LayeredParams& direction,
                                double beta, double scale) {
  const double plus = checked_value(obj, axpy(params, direction, beta), batch);
  const double minus = checked_value(obj, axpy(params, direction, -beta), batch);
  const double coeff = scale * (plus - minus) / (2.0 * beta);
  std::vector<LayerBlock> layers = direction.layers();
  for (auto& layer : layers) {
    for (double& v : layer.values) v = (v == 0.0) ? 0.0 : coeff * v;
  }
  return LayeredParams(std::move(layers));
}

LayeredParams zo_grad_estimate(const Objective& obj, const LayeredParams& params,
                               const Batch& batch, const ZoConfig& cfg, const RngKey& key) {
  cfg.validate();
  if (!cfg.mask.bound_to(params)) {
    throw Error(ErrorCode::kShapeMismatch, "ZO mask is not bound to the parameters");
  }
  const double scale = scaling_factor(cfg);
  const std::size_t n = cfg.samples_per_update;
  std::vector<std::vector<double>> samples(n);
  parallel_for(n, [&](std::size_t i) {
    RandomStream rng = key.stream(static_cast<std::uint32_t>(i));
    const LayeredParams v = sample_masked_direction(params, cfg.mask, rng);
    samples[i] = flatten(zo_estimate_along(obj, params, batch, v, cfg.beta, scale));
  });
  std::vector<double> sum(params.total_dim(), 0.0);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += s[j];
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (double& x : sum) x *= inv;
  LayeredParams out = unflatten(sum, params);
  for (std::size_t layer = 0; layer < out.num_layers(); ++layer) {
    if (!cfg.mask.contains(layer)) {
      out = out.with_block(layer, std::vector<double>(out.layer_size(layer), 0.0));
    }
  }
  return out;
}

MonteCarloEstimate smoothed_value(const Objective& obj, const LayeredParams& params,
                                  double beta, std::size_t n_samples, const RngKey& key,
                                  const Batch& batch) {
  if (n_samples < 2) throw Error(ErrorCode::kInvalidArgument, "smoothed_value needs n_samples >= 2");
  if (!(beta >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "beta must be >= 0");
  if (beta == 0.0) return {checked_value(obj, params, batch), 0.0};
  const LayerMask all = LayerMask::all(params);
  std::vector<double> values(n_samples);
  parallel_for(n_samples, [&](std::size_t i) {
    RandomStream rng = key.stream(static_cast<std::uint32_t>(i));
    const LayeredParams v = sample_masked_direction(params, all, rng);
    values[i] = checked_value(obj, axpy(params, v, beta), batch);
  });
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n_samples);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(n_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

double EstimatorMoments::std_err(std::size_t i) const {
  return std::sqrt(coordinate_variance.at(i) / static_cast<double>(trials));
}

EstimatorMoments estimator_moments(const Objective& obj, const LayeredParams& params,
                                   const Batch& batch, const ZoConfig& cfg,
                                   std::size_t n_trials, const RngKey& key) {
  cfg.validate();
  if (n_trials < 100) throw Error(ErrorCode::kInvalidArgument, "estimator_moments needs n_trials >= 100");
  if (!cfg.mask.bound_to(params)) {
    throw Error(ErrorCode::kShapeMismatch, "ZO mask is not bound to the parameters");
  }
  const double scale = scaling_factor(cfg);
  const std::size_t d = params.total_dim();
  const std::size_t num_chunks = (n_trials + kChunk - 1) / kChunk;
  std::vector<Moments> partial(num_chunks, Moments(d));
  parallel_for(num_chunks, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(n_trials, begin + kChunk);
    for (std::size_t t = begin; t < end; ++t) {
      RandomStream rng = key.stream(static_cast<std::uint32_t>(t));
      const LayeredParams v = sample_masked_direction(params, cfg.mask, rng);
      partial[c].add(flatten(zo_estimate_along(obj, params, batch, v, cfg.beta, scale)));
    }
  });
  Moments total(d);
  for (const auto& p : partial) total.merge(p);

  EstimatorMoments out{unflatten(total.mean, params), {}, 0.0, n_trials};
  out.coordinate_variance.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    out.coordinate_variance[i] = total.m2[i] / static_cast<double>(n_trials - 1);
    out.total_variance += out.coordinate_variance[i];
  }
  return out;
}

}  // namespace zorefine
