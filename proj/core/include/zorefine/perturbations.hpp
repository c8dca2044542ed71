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

// Post-alignment perturbation operators.
//
// Canonical text forms: `none`, `wnoise:<sigma>`, `anoise:<alpha>`,
// `quant:w<bits>a<bits>` (a16 means activations are left alone), with an
// optional `@i,j,...` suffix restricting quantization to those layers.

#ifndef ZOREFINE_PERTURBATIONS_HPP_
#define ZOREFINE_PERTURBATIONS_HPP_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "zorefine/mlp.hpp"
#include "zorefine/param_store.hpp"
#include "zorefine/rng.hpp"

namespace zorefine {

struct NoPerturbation {
  friend bool operator==(const NoPerturbation&, const NoPerturbation&) = default;
};

struct WeightNoise {
  double sigma = 1.0;
  friend bool operator==(const WeightNoise&, const WeightNoise&) = default;
};

struct ActivationNoise {
  double alpha = 0.05;
  friend bool operator==(const ActivationNoise&, const ActivationNoise&) = default;
};

struct Quantization {
  int weight_bits = 4;
  std::optional<int> act_bits;                     // nullopt: 16-bit, i.e. untouched
  std::optional<std::vector<std::size_t>> layers;  // nullopt: every layer
  friend bool operator==(const Quantization&, const Quantization&) = default;
};

class PerturbSpec {
 public:
  using Kind = std::variant<NoPerturbation, WeightNoise, ActivationNoise, Quantization>;

  PerturbSpec() = default;
  PerturbSpec(Kind kind);  // NOLINT(google-explicit-constructor)

  /// kInvalidArgument on unknown forms or out-of-range parameters.
  static PerturbSpec parse(std::string_view text);
  std::string to_string() const;

  const Kind& kind() const { return kind_; }
  bool is_stochastic() const;
  /// sigma, alpha, or weight bits; 0 for `none`.
  double level() const;
  void validate() const;

  friend bool operator==(const PerturbSpec&, const PerturbSpec&) = default;

 private:
  Kind kind_ = NoPerturbation{};
};

/// Symmetric uniform quantization with a per-block scale
/// s = max|w| / (2^(bits-1) - 1), round-half-away-from-zero and a symmetric
/// clamp. The endpoints +-max|w| are reproduced exactly and the operator is
/// idempotent. bits must lie in [2, 8].
std::vector<double> quantize_block(std::span<const double> weights, int bits);

/// Quantizes the layers named by `spec.layers` (all when unset).
LayeredParams quantize_model(const LayeredParams& params, const Quantization& spec);

/// Adds sigma * N(0, 1) to every coordinate.
LayeredParams add_weight_noise(const LayeredParams& params, double sigma,
                               RandomStream& rng);

/// Result of applying a spec: perturbed weights, and for activation-level
/// perturbations an MlpSpec whose forward pass carries the perturbation.
struct Perturbation {
  LayeredParams params;
  std::optional<MlpSpec> model;
};

/// `model` is the forward-pass spec of an MLP objective, or nullopt for an
/// analytic objective (which has no activations to perturb).
Perturbation apply(const LayeredParams& params, const PerturbSpec& spec,
                   const std::optional<MlpSpec>& model, const RngKey& key);

}  // namespace zorefine

#endif  // ZOREFINE_PERTURBATIONS_HPP_
