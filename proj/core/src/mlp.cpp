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

#include "zorefine/mlp.hpp"

#include <cmath>
#include <ostream>

#include "zorefine/csv.hpp"
#include "zorefine/error.hpp"
#include "zorefine/perturbations.hpp"

namespace zorefine {
namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DenseView {
  Eigen::Map<const RowMajorMatrix> weight;
  Eigen::Map<const Eigen::VectorXd> bias;
};

DenseView dense_view(const LayeredParams& params, std::size_t layer, std::size_t in,
                     std::size_t out) {
  const double* p = params.block(layer).data();
  const auto rows = static_cast<Eigen::Index>(out);
  const auto cols = static_cast<Eigen::Index>(in);
  return {Eigen::Map<const RowMajorMatrix>(p, rows, cols),
          Eigen::Map<const Eigen::VectorXd>(p + out * in, rows)};
}

double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

}  // namespace

// --- dataset ------------------------------------------------------------------

std::vector<std::size_t> Dataset::harmful_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < harmful.size(); ++i) {
    if (harmful[i]) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  const std::size_t n = labels.size();
  if (n == 0 || static_cast<std::size_t>(inputs.rows()) != n || harmful.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "dataset sizes are inconsistent");
  }
  for (int y : labels) {
    if (y != kRefuse && y != kComply) {
      throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    }
  }
}

void write_csv(const Dataset& data, std::ostream& out) {
  std::vector<std::string> header;
  for (std::size_t j = 0; j < data.num_features(); ++j) {
    header.push_back("x" + std::to_string(j));
  }
  header.push_back("label");
  header.push_back("harmful_flag");
  write_csv_row(out, header);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < data.num_features(); ++j) {
      row.push_back(format_double(data.inputs(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(j))));
    }
    row.push_back(std::to_string(data.labels[i]));
    row.push_back(data.harmful[i] ? "1" : "0");
    write_csv_row(out, row);
  }
}

Dataset make_refusal_dataset(std::uint64_t seed, std::size_t n, std::size_t k,
                             double separation, double margin) {
  if (n < 20 || k < 2) {
    throw Error(ErrorCode::kInvalidArgument, "refusal dataset needs n >= 20 and k >= 2");
  }
  const RngKey key{seed, Purpose::kData, 0};
  RandomStream dir_rng = key.stream(0);
  Eigen::VectorXd u(static_cast<Eigen::Index>(k));
  for (auto& x : u) x = dir_rng.normal();
  u.normalize();

  Dataset data;
  data.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  data.labels.resize(n);
  data.harmful.resize(n);
  // Harmful and benign rows alternate so any prefix stays balanced.
  for (std::size_t i = 0; i < n; ++i) {
    const bool harmful = (i % 2 == 0);
    const double side = harmful ? 1.0 : -1.0;
    RandomStream rng = key.at_step(1).stream(static_cast<std::uint32_t>(i));
    Eigen::VectorXd x(static_cast<Eigen::Index>(k));
    do {
      for (auto& v : x) v = rng.normal();
      x += side * separation * u;
    } while (side * u.dot(x) < margin);
    data.inputs.row(static_cast<Eigen::Index>(i)) = x.transpose();
    data.labels[i] = harmful ? kRefuse : kComply;
    data.harmful[i] = harmful;
  }
  return data;
}

// --- spec ---------------------------------------------------------------------

void MlpSpec::validate() const {
  if (widths.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument, "MLP needs at least two dense layers");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw Error(ErrorCode::kInvalidArgument, "MLP widths must be positive");
  }
  if (widths.back() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "MLP output width must be 2 (refuse/comply)");
  }
  if (activation_noise && !(activation_noise->alpha >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "activation noise alpha must be >= 0");
  }
  if (activation_bits && (*activation_bits < 2 || *activation_bits > 8)) {
    throw Error(ErrorCode::kInvalidArgument, "activation bits must lie in [2, 8]");
  }
}

// --- objective ----------------------------------------------------------------

struct MlpObjective::Cache {
  std::vector<Eigen::VectorXd> inputs;  // input of each dense layer
  Eigen::VectorXd logits;
};

MlpObjective::MlpObjective(MlpSpec spec, std::shared_ptr<const Dataset> data)
    : spec_(std::move(spec)), data_(std::move(data)), layout_([&] {
        spec_.validate();
        std::vector<LayerBlock> layers;
        for (std::size_t j = 0; j + 1 < spec_.widths.size(); ++j) {
          const std::size_t in = spec_.widths[j];
          const std::size_t out = spec_.widths[j + 1];
          layers.push_back({"dense" + std::to_string(j),
                            std::vector<double>(out * in + out, 0.0)});
        }
        return LayeredParams(std::move(layers));
      }()) {
  if (!data_) throw Error(ErrorCode::kInvalidArgument, "MLP needs a dataset");
  data_->validate();
  if (data_->num_features() != spec_.widths.front()) {
    throw Error(ErrorCode::kShapeMismatch, "MLP input width does not match the dataset");
  }
  descriptor_.name = "mlp";
}

bool MlpObjective::has_gradient() const {
  const bool noisy = spec_.activation_noise && spec_.activation_noise->alpha != 0.0;
  return !noisy && !spec_.activation_bits;
}

MlpObjective MlpObjective::with_spec(MlpSpec spec) const {
  return MlpObjective(std::move(spec), data_);
}

LayeredParams MlpObjective::initialize(const RngKey& key) const {
  std::vector<LayerBlock> layers = layout_.layers();
  for (std::size_t j = 0; j < layers.size(); ++j) {
    const std::size_t in = spec_.widths[j];
    const std::size_t out = spec_.widths[j + 1];
    const double scale = std::sqrt(2.0 / static_cast<double>(in + out));
    RandomStream rng = key.stream(static_cast<std::uint32_t>(j));
    auto& v = layers[j].values;
    for (std::size_t i = 0; i < out * in; ++i) v[i] = scale * rng.normal();
    for (std::size_t i = out * in; i < v.size(); ++i) v[i] = 0.0;
  }
  return LayeredParams(std::move(layers));
}

double MlpObjective::forward(const LayeredParams& params, std::size_t row,
                             Cache* cache) const {
  Eigen::VectorXd x = data_->inputs.row(static_cast<Eigen::Index>(row)).transpose();
  const std::size_t num_layers = spec_.num_layers();
  const bool noisy = spec_.activation_noise && spec_.activation_noise->alpha != 0.0;
  std::optional<RandomStream> noise_rng;
  if (noisy) noise_rng = spec_.activation_noise->key.stream(static_cast<std::uint32_t>(row));

  if (cache) cache->inputs.clear();
  for (std::size_t j = 0; j < num_layers; ++j) {
    if (cache) cache->inputs.push_back(x);
    const DenseView d = dense_view(params, j, spec_.widths[j], spec_.widths[j + 1]);
    Eigen::VectorXd z = d.weight * x + d.bias;
    if (j + 1 == num_layers) {
      x = std::move(z);
      break;
    }
    x = z.array().tanh().matrix();
    if (noisy) {
      const double mean = x.mean();
      const double sd = std::sqrt((x.array() - mean).square().mean());
      const double scale = spec_.activation_noise->alpha * sd;
      for (auto& v : x) v += scale * noise_rng->normal();
    }
    if (spec_.activation_bits) {
      const std::vector<double> q = quantize_block(
          std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
          *spec_.activation_bits);
      x = Eigen::Map<const Eigen::VectorXd>(q.data(), x.size());
    }
  }
  const int label = data_->labels[row];
  const double loss = log_sum_exp(x) - x(label);
  if (cache) cache->logits = std::move(x);
  return loss;
}

double MlpObjective::value(const LayeredParams& params, const Batch& batch) const {
  require_layout(params);
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "MLP loss needs a non-empty batch");
  double sum = 0.0;
  for (std::size_t row : batch.indices) {
    if (row >= data_->size()) throw Error(ErrorCode::kInvalidArgument, "batch index out of range");
    sum += forward(params, row, nullptr);
  }
  return sum / static_cast<double>(batch.indices.size());
}

LayeredParams MlpObjective::gradient(const LayeredParams& params,
                                     const Batch& batch) const {
  if (!has_gradient()) {
    throw Error(ErrorCode::kGradUnavailable,
                "MLP gradient is only defined on the noiseless, unquantized forward pass");
  }
  require_layout(params);
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "MLP gradient needs a non-empty batch");
  const std::size_t num_layers = spec_.num_layers();
  std::vector<LayerBlock> grads = LayeredParams::zeros_like(params).layers();
  Cache cache;
  for (std::size_t row : batch.indices) {
    if (row >= data_->size()) throw Error(ErrorCode::kInvalidArgument, "batch index out of range");
    forward(params, row, &cache);
    // d loss / d logits = softmax - onehot
    Eigen::VectorXd delta = (cache.logits.array() - log_sum_exp(cache.logits)).exp().matrix();
    delta(data_->labels[row]) -= 1.0;
    for (std::size_t jj = num_layers; jj-- > 0;) {
      const std::size_t in = spec_.widths[jj];
      const std::size_t out = spec_.widths[jj + 1];
      const Eigen::VectorXd& x = cache.inputs[jj];
      Eigen::Map<RowMajorMatrix> gw(grads[jj].values.data(), static_cast<Eigen::Index>(out),
                                    static_cast<Eigen::Index>(in));
      Eigen::Map<Eigen::VectorXd> gb(grads[jj].values.data() + out * in,
                                     static_cast<Eigen::Index>(out));
      gw.noalias() += delta * x.transpose();
      gb += delta;
      if (jj == 0) break;
      const DenseView d = dense_view(params, jj, in, out);
      Eigen::VectorXd upstream = d.weight.transpose() * delta;
      // x is tanh output of the previous layer
      delta = upstream.array() * (1.0 - x.array().square());
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.indices.size());
  for (auto& g : grads) {
    for (double& v : g.values) v *= inv;
  }
  return LayeredParams(std::move(grads));
}

Eigen::VectorXd MlpObjective::logits(const LayeredParams& params, std::size_t row) const {
  require_layout(params);
  Cache cache;
  forward(params, row, &cache);
  return cache.logits;
}

int MlpObjective::predict(const LayeredParams& params, std::size_t row) const {
  const Eigen::VectorXd z = logits(params, row);
  return z(kComply) > z(kRefuse) ? kComply : kRefuse;
}

double MlpObjective::accuracy(const LayeredParams& params, const Batch& batch) const {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "accuracy needs a non-empty batch");
  std::size_t correct = 0;
  for (std::size_t row : batch.indices) {
    correct += predict(params, row) == data_->labels[row] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.indices.size());
}

std::vector<Eigen::MatrixXd> MlpObjective::layer_inputs(const LayeredParams& params,
                                                        const Batch& batch) const {
  require_layout(params);
  const std::size_t num_layers = spec_.num_layers();
  std::vector<Eigen::MatrixXd> out(num_layers);
  const auto rows = static_cast<Eigen::Index>(batch.indices.size());
  for (std::size_t j = 0; j < num_layers; ++j) {
    out[j].resize(rows, static_cast<Eigen::Index>(spec_.widths[j]));
  }
  Cache cache;
  for (Eigen::Index r = 0; r < rows; ++r) {
    forward(params, batch.indices[static_cast<std::size_t>(r)], &cache);
    for (std::size_t j = 0; j < num_layers; ++j) out[j].row(r) = cache.inputs[j].transpose();
  }
  return out;
}

MlpObjective::ActivationStorage MlpObjective::activation_storage(
    std::size_t batch_size) const {
  ActivationStorage s;
  std::size_t widest_pair = 0;
  for (std::size_t j = 0; j + 1 < spec_.widths.size(); ++j) {
    widest_pair = std::max(widest_pair, spec_.widths[j] + spec_.widths[j + 1]);
    s.backprop += spec_.widths[j];
  }
  s.backprop += spec_.widths.back();
  s.forward_only = widest_pair;
  s.forward_only *= batch_size;
  s.backprop *= batch_size;
  return s;
}

}  // namespace zorefine
