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

// Tiny tanh MLP classifier on a synthetic refusal task.
//
// Each dense layer is one parameter block laid out as the row-major weight
// matrix (out x in) followed by the bias (out). Label 0 means "refuse",
// label 1 means "comply"; harmful-flagged rows should be refused.

#ifndef ZOREFINE_MLP_HPP_
#define ZOREFINE_MLP_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "zorefine/objectives.hpp"

namespace zorefine {

inline constexpr int kRefuse = 0;
inline constexpr int kComply = 1;

struct Dataset {
  Eigen::MatrixXd inputs;      // n x k
  std::vector<int> labels;     // kRefuse / kComply
  std::vector<bool> harmful;   // harmful-prompt analog

  std::size_t size() const { return labels.size(); }
  std::size_t num_features() const { return static_cast<std::size_t>(inputs.cols()); }
  std::vector<std::size_t> harmful_indices() const;
  /// kInvalidArgument on inconsistent sizes or n == 0.
  void validate() const;
};

/// CSV with columns x0..x{k-1},label,harmful_flag.
void write_csv(const Dataset& data, std::ostream& out);

/// Two Gaussian clusters along a random unit direction. The harmful cluster
/// is labelled refuse; points closer than `margin` to the separating
/// hyperplane are redrawn so the task stays linearly separable.
/// Requires n >= 20 and k >= 2.
Dataset make_refusal_dataset(std::uint64_t seed, std::size_t n, std::size_t k,
                             double separation = 2.0, double margin = 0.25);

struct ActivationNoiseSpec {
  double alpha = 0.0;  // relative to the per-sample std of the hidden vector
  RngKey key{0, Purpose::kActivationNoise, 0};
};

struct MlpSpec {
  std::vector<std::size_t> widths;  // input, hidden..., output
  std::optional<ActivationNoiseSpec> activation_noise;
  std::optional<int> activation_bits;  // simulated activation quantization

  std::size_t num_layers() const { return widths.size() - 1; }
  void validate() const;
};

class MlpObjective final : public Objective {
 public:
  MlpObjective(MlpSpec spec, std::shared_ptr<const Dataset> data);

  /// Mean softmax cross-entropy over the batch (kInvalidArgument if empty).
  double value(const LayeredParams& params, const Batch& batch) const override;
  /// Reverse-mode gradient; only available on the noiseless, unquantized path.
  bool has_gradient() const override;
  LayeredParams gradient(const LayeredParams& params,
                         const Batch& batch) const override;
  const ObjectiveDescriptor& descriptor() const override { return descriptor_; }
  const LayeredParams& layout() const override { return layout_; }
  std::size_t num_samples() const override { return data_->size(); }
  bool has_activations() const override { return true; }

  const MlpSpec& spec() const { return spec_; }
  const Dataset& data() const { return *data_; }
  const std::shared_ptr<const Dataset>& data_ptr() const { return data_; }

  /// Same network and data under a different forward-pass configuration.
  MlpObjective with_spec(MlpSpec spec) const;

  /// Glorot-normal weights, zero biases.
  LayeredParams initialize(const RngKey& key) const;

  Eigen::VectorXd logits(const LayeredParams& params, std::size_t row) const;
  int predict(const LayeredParams& params, std::size_t row) const;
  double accuracy(const LayeredParams& params, const Batch& batch) const;

  /// Input activations of every dense layer over the batch, one row per
  /// sample (element 0 is the raw input).
  std::vector<Eigen::MatrixXd> layer_inputs(const LayeredParams& params,
                                            const Batch& batch) const;

  /// Floats of activation state held per sample: a forward-only pass (what
  /// a zeroth-order step needs) keeps one layer alive at a time, backprop
  /// keeps every layer.
  struct ActivationStorage {
    std::size_t forward_only = 0;
    std::size_t backprop = 0;
  };
  ActivationStorage activation_storage(std::size_t batch_size) const;

 private:
  struct Cache;
  double forward(const LayeredParams& params, std::size_t row, Cache* cache) const;

  MlpSpec spec_;
  std::shared_ptr<const Dataset> data_;
  LayeredParams layout_;
  ObjectiveDescriptor descriptor_;
};

}  // namespace zorefine

#endif  // ZOREFINE_MLP_HPP_
