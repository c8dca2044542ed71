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

#include "zorefine/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <iterator>
#include <vector>

#include "json.hpp"
#include "zorefine/error.hpp"

namespace zorefine {

std::filesystem::path sidecar_path(const std::filesystem::path& bin) {
  std::filesystem::path out = bin;
  out.replace_extension(".json");
  return out;
}

void save_checkpoint(const std::filesystem::path& bin, const LayeredParams& params,
                     const CheckpointInfo& info) {
  std::string blob;
  blob.reserve(params.total_dim() * 8);
  for (double x : flatten(params)) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xffU));
  }
  nlohmann::ordered_json meta;
  meta["format"] = "zorefine-checkpoint-v1";
  meta["dtype"] = "float64-le";
  meta["seed"] = info.seed;
  meta["stage"] = info.stage;
  meta["total_dim"] = params.total_dim();
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    layers.push_back({{"name", params.id(l).name}, {"size", params.layer_size(l)}});
  }
  meta["layers"] = std::move(layers);

  std::ofstream out(bin, std::ios::binary | std::ios::trunc);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  std::ofstream side(sidecar_path(bin), std::ios::trunc);
  side << meta.dump(2) << '\n';
  if (!out || !side) throw Error(ErrorCode::kIo, "cannot write checkpoint " + bin.string());
}

LayeredParams load_checkpoint(const std::filesystem::path& bin, CheckpointInfo* info) {
  std::ifstream side(sidecar_path(bin));
  if (!side) throw Error(ErrorCode::kIo, "missing checkpoint sidecar for " + bin.string());
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, "malformed checkpoint sidecar: " + std::string(e.what()));
  }
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read checkpoint " + bin.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<LayerBlock> layers;
  std::size_t total = 0;
  try {
    for (const auto& layer : meta.at("layers")) {
      const auto size = layer.at("size").get<std::size_t>();
      layers.push_back({layer.at("name").get<std::string>(), std::vector<double>(size)});
      total += size;
    }
    if (info != nullptr) {
      info->seed = meta.at("seed").get<std::uint64_t>();
      info->stage = meta.at("stage").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, "malformed checkpoint sidecar: " + std::string(e.what()));
  }
  if (blob.size() != total * 8) {
    throw Error(ErrorCode::kLengthMismatch, "checkpoint blob has " + std::to_string(blob.size()) +
                                                " bytes, sidecar expects " +
                                                std::to_string(total * 8));
  }
  std::size_t pos = 0;
  for (auto& layer : layers) {
    for (double& x : layer.values) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[pos + b])) << (8 * b);
      }
      x = std::bit_cast<double>(bits);
      pos += 8;
    }
  }
  return LayeredParams(std::move(layers));
}

}  // namespace zorefine
