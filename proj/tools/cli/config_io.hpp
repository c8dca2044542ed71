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

// JSON configuration documents for the zorefine tool.
//
// Precedence, lowest first: built-in defaults, the --config file, --set
// overrides, the ZOREFINE_SEED environment variable, the --seed flag.

#ifndef ZOREFINE_TOOLS_CONFIG_IO_HPP_
#define ZOREFINE_TOOLS_CONFIG_IO_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "zorefine/pipeline.hpp"

namespace zorefine::cli {

using Json = nlohmann::ordered_json;

/// Full document for `cfg`; every field is written.
Json to_json(const PipelineConfig& cfg);

/// Overlays `doc` on the defaults. Unknown keys and ill-typed values are
/// kConfig errors; the result is validated.
PipelineConfig from_json(const Json& doc);

/// Applies "a.b.c=value" to `doc`. The value is read as JSON when it parses,
/// otherwise as a string.
void apply_override(Json& doc, const std::string& assignment);

/// Parses a decimal unsigned 64-bit seed; kConfig otherwise.
std::uint64_t parse_seed(const std::string& text);

struct ConfigSources {
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> env_seed;   // value of ZOREFINE_SEED, if set
  std::optional<std::uint64_t> flag_seed;
};

PipelineConfig load_config(const ConfigSources& sources);

}  // namespace zorefine::cli

#endif  // ZOREFINE_TOOLS_CONFIG_IO_HPP_
