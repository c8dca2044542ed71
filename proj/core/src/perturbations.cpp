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

#include "zorefine/perturbations.hpp"

#include <algorithm>
#include <cmath>

#include "zorefine/csv.hpp"
#include "zorefine/error.hpp"

namespace zorefine {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

int parse_bits(std::string_view text, std::string_view whole) {
  int bits = 0;
  if (text.empty() || text.size() > 2) {
    throw Error(ErrorCode::kInvalidArgument, "bad bit width in '" + std::string(whole) + "'");
  }
  for (char c : text) {
    if (c < '0' || c > '9') {
      throw Error(ErrorCode::kInvalidArgument, "bad bit width in '" + std::string(whole) + "'");
    }
    bits = bits * 10 + (c - '0');
  }
  return bits;
}

}  // namespace

PerturbSpec::PerturbSpec(Kind kind) : kind_(std::move(kind)) { validate(); }

PerturbSpec PerturbSpec::parse(std::string_view text) {
  if (text == "none") return PerturbSpec(NoPerturbation{});
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument, "unknown perturbation '" + std::string(text) + "'");
  }
  const std::string_view head = text.substr(0, colon);
  std::string_view body = text.substr(colon + 1);
  if (head == "wnoise") return PerturbSpec(WeightNoise{parse_double(body)});
  if (head == "anoise") return PerturbSpec(ActivationNoise{parse_double(body)});
  if (head != "quant") {
    throw Error(ErrorCode::kInvalidArgument, "unknown perturbation '" + std::string(text) + "'");
  }
  Quantization q;
  const auto at = body.find('@');
  if (at != std::string_view::npos) {
    std::vector<std::size_t> layers;
    std::string_view rest = body.substr(at + 1);
    body = body.substr(0, at);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      const double v = parse_double(item);
      if (v < 0 || v != std::floor(v)) {
        throw Error(ErrorCode::kInvalidArgument, "bad layer index in '" + std::string(text) + "'");
      }
      layers.push_back(static_cast<std::size_t>(v));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    q.layers = std::move(layers);
  }
  if (body.empty() || body[0] != 'w') {
    throw Error(ErrorCode::kInvalidArgument, "quantization must look like w<bits>a<bits>");
  }
  const auto a_pos = body.find('a');
  q.weight_bits = parse_bits(body.substr(1, a_pos == std::string_view::npos ? body.npos : a_pos - 1), text);
  if (a_pos != std::string_view::npos) {
    const int act = parse_bits(body.substr(a_pos + 1), text);
    if (act != 16) q.act_bits = act;
  }
  return PerturbSpec(q);
}

std::string PerturbSpec::to_string() const {
  return std::visit(
      Overloaded{
          [](const NoPerturbation&) -> std::string { return "none"; },
          [](const WeightNoise& w) { return "wnoise:" + format_double(w.sigma); },
          [](const ActivationNoise& a) { return "anoise:" + format_double(a.alpha); },
          [](const Quantization& q) {
            std::string s = "quant:w" + std::to_string(q.weight_bits) + "a" +
                            std::to_string(q.act_bits.value_or(16));
            if (q.layers) {
              s += '@';
              for (std::size_t i = 0; i < q.layers->size(); ++i) {
                if (i) s += ',';
                s += std::to_string((*q.layers)[i]);
              }
            }
            return s;
          },
      },
      kind_);
}

bool PerturbSpec::is_stochastic() const {
  return std::holds_alternative<WeightNoise>(kind_) ||
         std::holds_alternative<ActivationNoise>(kind_);
}

double PerturbSpec::level() const {
  return std::visit(Overloaded{
                        [](const NoPerturbation&) { return 0.0; },
                        [](const WeightNoise& w) { return w.sigma; },
                        [](const ActivationNoise& a) { return a.alpha; },
                        [](const Quantization& q) { return static_cast<double>(q.weight_bits); },
                    },
                    kind_);
}

void PerturbSpec::validate() const {
  std::visit(Overloaded{
                 [](const NoPerturbation&) {},
                 [](const WeightNoise& w) {
                   if (!(w.sigma > 0.0) || !std::isfinite(w.sigma)) {
                     throw Error(ErrorCode::kInvalidArgument, "weight noise needs sigma > 0");
                   }
                 },
                 [](const ActivationNoise& a) {
                   if (!(a.alpha > 0.0) || !std::isfinite(a.alpha)) {
                     throw Error(ErrorCode::kInvalidArgument, "activation noise needs alpha > 0");
                   }
                 },
                 [](const Quantization& q) {
                   if (q.weight_bits < 2 || q.weight_bits > 8) {
                     throw Error(ErrorCode::kInvalidArgument, "weight bits must lie in [2, 8]");
                   }
                   if (q.act_bits && (*q.act_bits < 2 || *q.act_bits > 8)) {
                     throw Error(ErrorCode::kInvalidArgument,
                                 "activation bits must lie in [2, 8] (or 16 for none)");
                   }
                 },
             },
             kind_);
}

std::vector<double> quantize_block(std::span<const double> weights, int bits) {
  if (bits < 2 || bits > 8) {
    throw Error(ErrorCode::kInvalidArgument, "quantization bits must lie in [2, 8]");
  }
  if (weights.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot quantize an empty block");
  double max_abs = 0.0;
  for (double w : weights) max_abs = std::max(max_abs, std::abs(w));
  std::vector<double> out(weights.size(), 0.0);
  if (max_abs == 0.0) return out;
  const double levels = static_cast<double>((1 << (bits - 1)) - 1);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    // w / s with s = max_abs / levels; std::round ties away from zero.
    const double q = std::clamp(std::round(weights[i] / max_abs * levels), -levels, levels);
    out[i] = (q / levels) * max_abs;
  }
  return out;
}

LayeredParams quantize_model(const LayeredParams& params, const Quantization& spec) {
  std::vector<std::size_t> layers;
  if (spec.layers) {
    layers = *spec.layers;
  } else {
    for (std::size_t i = 0; i < params.num_layers(); ++i) layers.push_back(i);
  }
  LayeredParams out = params;
  for (std::size_t layer : layers) {
    if (layer >= params.num_layers()) {
      throw Error(ErrorCode::kInvalidArgument, "quantization layer out of range");
    }
    out = out.with_block(layer, quantize_block(params.block(layer), spec.weight_bits));
  }
  return out;
}

LayeredParams add_weight_noise(const LayeredParams& params, double sigma,
                               RandomStream& rng) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");
  std::vector<LayerBlock> layers = params.layers();
  for (auto& layer : layers) {
    for (double& v : layer.values) v += sigma * rng.normal();
  }
  return LayeredParams(std::move(layers));
}

Perturbation apply(const LayeredParams& params, const PerturbSpec& spec,
                   const std::optional<MlpSpec>& model, const RngKey& key) {
  return std::visit(
      Overloaded{
          [&](const NoPerturbation&) { return Perturbation{params, model}; },
          [&](const WeightNoise& w) {
            RandomStream rng = key.with_purpose(Purpose::kWeightNoise).stream(0);
            return Perturbation{add_weight_noise(params, w.sigma, rng), model};
          },
          [&](const ActivationNoise& a) {
            if (!model) {
              throw Error(ErrorCode::kActivationNoiseOnAnalyticObjective,
                          "activation noise needs a model with hidden activations");
            }
            MlpSpec augmented = *model;
            augmented.activation_noise =
                ActivationNoiseSpec{a.alpha, key.with_purpose(Purpose::kActivationNoise)};
            return Perturbation{params, std::move(augmented)};
          },
          [&](const Quantization& q) {
            Perturbation out{quantize_model(params, q), model};
            if (q.act_bits) {
              if (!out.model) {
                throw Error(ErrorCode::kActivationsUnavailable,
                            "activation quantization needs a model with hidden activations");
              }
              out.model->activation_bits = q.act_bits;
            }
            return out;
          },
      },
      spec.kind());
}

}  // namespace zorefine
