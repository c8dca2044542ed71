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

// Layered parameter container.
//
// Model parameters are an ordered list of named layer blocks. Values are
// immutable after construction; every operation returns a new value, so a
// LayeredParams can be shared freely across threads.

#ifndef ZOREFINE_PARAM_STORE_HPP_
#define ZOREFINE_PARAM_STORE_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "zorefine/rng.hpp"

namespace zorefine {

struct LayerId {
  std::size_t index = 0;
  std::string name;

  friend bool operator==(const LayerId&, const LayerId&) = default;
};

struct LayerBlock {
  std::string name;
  std::vector<double> values;
};

class LayeredParams {
 public:
  /// Throws kInvalidArgument for an empty layer list or an empty block.
  explicit LayeredParams(std::vector<LayerBlock> layers);

  /// Same layout as `shape`, every value zero.
  static LayeredParams zeros_like(const LayeredParams& shape);

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t total_dim() const { return total_dim_; }
  std::size_t layer_size(std::size_t layer) const;
  std::size_t layer_offset(std::size_t layer) const;
  LayerId id(std::size_t layer) const;
  std::span<const double> block(std::size_t layer) const;
  const std::vector<LayerBlock>& layers() const { return layers_; }

  /// Copy with layer `layer` replaced; kShapeMismatch if the size differs.
  LayeredParams with_block(std::size_t layer, std::vector<double> values) const;

  /// True when both have the same number of layers with equal sizes.
  bool same_structure(const LayeredParams& other) const;

  /// Bitwise equality of names and values.
  friend bool operator==(const LayeredParams& a, const LayeredParams& b);

 private:
  std::vector<LayerBlock> layers_;
  std::vector<std::size_t> offsets_;
  std::size_t total_dim_ = 0;
};

/// A set of selected layers bound to the layout of one LayeredParams.
class LayerMask {
 public:
  static LayerMask all(const LayeredParams& shape);
  static LayerMask none(const LayeredParams& shape);
  /// kInvalidArgument if an index is out of range.
  static LayerMask of(const LayeredParams& shape,
                      const std::vector<std::size_t>& layers);

  bool contains(std::size_t layer) const { return selected_.at(layer); }
  std::vector<std::size_t> selected() const;
  std::size_t num_selected() const;
  std::size_t masked_dim() const { return masked_dim_; }
  std::size_t num_layers() const { return selected_.size(); }
  bool empty() const { return masked_dim_ == 0; }
  bool bound_to(const LayeredParams& shape) const;

  friend bool operator==(const LayerMask&, const LayerMask&) = default;

 private:
  std::vector<bool> selected_;
  std::vector<std::size_t> sizes_;
  std::size_t masked_dim_ = 0;
};

/// Concatenation of the blocks in layer-index order.
std::vector<double> flatten(const LayeredParams& params);

/// Inverse of flatten; kLengthMismatch when vec.size() != total_dim.
LayeredParams unflatten(std::span<const double> vec, const LayeredParams& shape);

/// Draws v ~ N(0, I_d) over the whole layout, then zeroes unselected layers.
LayeredParams sample_masked_direction(const LayeredParams& shape,
                                      const LayerMask& mask,
                                      RandomStream& rng);

/// params + scale * direction; kShapeMismatch on differing layouts.
LayeredParams axpy(const LayeredParams& params, const LayeredParams& direction,
                   double scale);

double dot(const LayeredParams& a, const LayeredParams& b);
double squared_norm(const LayeredParams& a);

}  // namespace zorefine

#endif  // ZOREFINE_PARAM_STORE_HPP_
