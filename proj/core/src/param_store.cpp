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

#include "zorefine/param_store.hpp"

#include <algorithm>
#include <cstring>

#include "zorefine/error.hpp"

namespace zorefine {

LayeredParams::LayeredParams(std::vector<LayerBlock> layers)
    : layers_(std::move(layers)) {
  if (layers_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "parameters need at least one layer");
  }
  offsets_.reserve(layers_.size());
  for (const auto& layer : layers_) {
    if (layer.values.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "layer '" + layer.name + "' has an empty block");
    }
    offsets_.push_back(total_dim_);
    total_dim_ += layer.values.size();
  }
}

LayeredParams LayeredParams::zeros_like(const LayeredParams& shape) {
  std::vector<LayerBlock> layers;
  layers.reserve(shape.num_layers());
  for (const auto& layer : shape.layers_) {
    layers.push_back({layer.name, std::vector<double>(layer.values.size(), 0.0)});
  }
  return LayeredParams(std::move(layers));
}

std::size_t LayeredParams::layer_size(std::size_t layer) const {
  return layers_.at(layer).values.size();
}

std::size_t LayeredParams::layer_offset(std::size_t layer) const {
  return offsets_.at(layer);
}

LayerId LayeredParams::id(std::size_t layer) const {
  return {layer, layers_.at(layer).name};
}

std::span<const double> LayeredParams::block(std::size_t layer) const {
  return layers_.at(layer).values;
}

LayeredParams LayeredParams::with_block(std::size_t layer,
                                        std::vector<double> values) const {
  if (values.size() != layer_size(layer)) {
    throw Error(ErrorCode::kShapeMismatch,
                "replacement block for layer " + std::to_string(layer) +
                    " has wrong size");
  }
  LayeredParams out = *this;
  out.layers_[layer].values = std::move(values);
  return out;
}

bool LayeredParams::same_structure(const LayeredParams& other) const {
  if (num_layers() != other.num_layers()) return false;
  for (std::size_t i = 0; i < num_layers(); ++i) {
    if (layer_size(i) != other.layer_size(i)) return false;
  }
  return true;
}

bool operator==(const LayeredParams& a, const LayeredParams& b) {
  if (!a.same_structure(b)) return false;
  for (std::size_t i = 0; i < a.num_layers(); ++i) {
    if (a.layers_[i].name != b.layers_[i].name) return false;
    const auto& x = a.layers_[i].values;
    const auto& y = b.layers_[i].values;
    if (std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

LayerMask LayerMask::all(const LayeredParams& shape) {
  std::vector<std::size_t> every(shape.num_layers());
  for (std::size_t i = 0; i < every.size(); ++i) every[i] = i;
  return of(shape, every);
}

LayerMask LayerMask::none(const LayeredParams& shape) { return of(shape, {}); }

LayerMask LayerMask::of(const LayeredParams& shape,
                        const std::vector<std::size_t>& layers) {
  LayerMask mask;
  mask.selected_.assign(shape.num_layers(), false);
  mask.sizes_.resize(shape.num_layers());
  for (std::size_t i = 0; i < shape.num_layers(); ++i) {
    mask.sizes_[i] = shape.layer_size(i);
  }
  for (std::size_t layer : layers) {
    if (layer >= shape.num_layers()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "mask layer " + std::to_string(layer) + " out of range");
    }
    if (!mask.selected_[layer]) {
      mask.selected_[layer] = true;
      mask.masked_dim_ += mask.sizes_[layer];
    }
  }
  return mask;
}

std::vector<std::size_t> LayerMask::selected() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < selected_.size(); ++i) {
    if (selected_[i]) out.push_back(i);
  }
  return out;
}

std::size_t LayerMask::num_selected() const {
  std::size_t n = 0;
  for (bool s : selected_) n += s ? 1 : 0;
  return n;
}

bool LayerMask::bound_to(const LayeredParams& shape) const {
  if (shape.num_layers() != sizes_.size()) return false;
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (shape.layer_size(i) != sizes_[i]) return false;
  }
  return true;
}

std::vector<double> flatten(const LayeredParams& params) {
  std::vector<double> out;
  out.reserve(params.total_dim());
  for (const auto& layer : params.layers()) {
    out.insert(out.end(), layer.values.begin(), layer.values.end());
  }
  return out;
}

LayeredParams unflatten(std::span<const double> vec, const LayeredParams& shape) {
  if (vec.size() != shape.total_dim()) {
    throw Error(ErrorCode::kLengthMismatch,
                "vector of length " + std::to_string(vec.size()) +
                    " does not match total_dim " +
                    std::to_string(shape.total_dim()));
  }
  std::vector<LayerBlock> layers;
  layers.reserve(shape.num_layers());
  std::size_t offset = 0;
  for (const auto& layer : shape.layers()) {
    const std::size_t n = layer.values.size();
    layers.push_back({layer.name, std::vector<double>(vec.begin() + offset,
                                                      vec.begin() + offset + n)});
    offset += n;
  }
  return LayeredParams(std::move(layers));
}

LayeredParams sample_masked_direction(const LayeredParams& shape,
                                      const LayerMask& mask, RandomStream& rng) {
  if (!mask.bound_to(shape)) {
    throw Error(ErrorCode::kShapeMismatch, "mask is not bound to this layout");
  }
  std::vector<LayerBlock> layers;
  layers.reserve(shape.num_layers());
  for (std::size_t i = 0; i < shape.num_layers(); ++i) {
    std::vector<double> v(shape.layer_size(i));
    for (double& x : v) x = rng.normal();
    if (!mask.contains(i)) std::fill(v.begin(), v.end(), 0.0);
    layers.push_back({shape.layers()[i].name, std::move(v)});
  }
  return LayeredParams(std::move(layers));
}

LayeredParams axpy(const LayeredParams& params, const LayeredParams& direction,
                   double scale) {
  if (!params.same_structure(direction)) {
    throw Error(ErrorCode::kShapeMismatch, "axpy on differing layouts");
  }
  std::vector<LayerBlock> layers = params.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto d = direction.block(i);
    auto& v = layers[i].values;
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += scale * d[j];
  }
  return LayeredParams(std::move(layers));
}

double dot(const LayeredParams& a, const LayeredParams& b) {
  if (!a.same_structure(b)) {
    throw Error(ErrorCode::kShapeMismatch, "dot on differing layouts");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.num_layers(); ++i) {
    const auto x = a.block(i);
    const auto y = b.block(i);
    for (std::size_t j = 0; j < x.size(); ++j) sum += x[j] * y[j];
  }
  return sum;
}

double squared_norm(const LayeredParams& a) { return dot(a, a); }

}  // namespace zorefine
