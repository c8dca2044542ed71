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

// Parameter checkpoints: the flattened vector as little-endian float64 in
// `<name>.bin`, plus a JSON sidecar `<name>.json` holding layer names, sizes,
// the run seed and a stage tag.

#ifndef ZOREFINE_CHECKPOINT_HPP_
#define ZOREFINE_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "zorefine/param_store.hpp"

namespace zorefine {

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::string stage;
};

/// Path of the JSON sidecar belonging to a .bin file.
std::filesystem::path sidecar_path(const std::filesystem::path& bin);

/// kIo on write failure.
void save_checkpoint(const std::filesystem::path& bin, const LayeredParams& params,
                     const CheckpointInfo& info);

/// kIo when a file is missing or malformed; kLengthMismatch when the blob
/// size disagrees with the sidecar.
LayeredParams load_checkpoint(const std::filesystem::path& bin, CheckpointInfo* info = nullptr);

}  // namespace zorefine

#endif  // ZOREFINE_CHECKPOINT_HPP_
