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

// SHA-256 manifests in the `sha256sum` text format ("<hex>  <name>").

#ifndef ZOREFINE_TOOLS_MANIFEST_HPP_
#define ZOREFINE_TOOLS_MANIFEST_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace zorefine::cli {

inline constexpr const char* kManifestName = "MANIFEST.sha256";

std::string sha256_hex(const std::filesystem::path& file);

/// Hashes the named files (relative to `dir`) in sorted order and writes
/// `dir`/MANIFEST.sha256.
void write_manifest(const std::filesystem::path& dir, std::vector<std::string> files);

/// Names of manifest entries whose file is missing or whose hash differs.
std::vector<std::string> check_manifest(const std::filesystem::path& dir);

}  // namespace zorefine::cli

#endif  // ZOREFINE_TOOLS_MANIFEST_HPP_
