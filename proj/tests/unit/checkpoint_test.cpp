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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "zorefine/error.hpp"

namespace zorefine {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "zorefine_checkpoint_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const LayeredParams p({{"dense0", {1.0, -0.0, 1e-300, std::numeric_limits<double>::max()}},
                         {"dense1", {0.1, 1.0 / 3.0}}});
  const fs::path bin = scratch("rt.bin");
  save_checkpoint(bin, p, {42, "stage1"});
  CheckpointInfo info;
  const LayeredParams back = load_checkpoint(bin, &info);
  EXPECT_EQ(back, p);
  EXPECT_TRUE(std::signbit(back.block(0)[1]));
  EXPECT_EQ(info.seed, 42u);
  EXPECT_EQ(info.stage, "stage1");
  EXPECT_EQ(back.id(1).name, "dense1");
  EXPECT_EQ(fs::file_size(bin), 6u * sizeof(double));
}

TEST(Checkpoint, SidecarSitsNextToTheBlob) {
  EXPECT_EQ(sidecar_path("out/stage3.bin"), fs::path("out/stage3.json"));
}

TEST(Checkpoint, MissingFileIsAnIoError) {
  try {
    load_checkpoint(scratch("absent.bin"));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(Checkpoint, TruncatedBlobIsALengthMismatch) {
  const fs::path bin = scratch("short.bin");
  save_checkpoint(bin, LayeredParams({{"x", {1.0, 2.0, 3.0}}}), {1, "stage1"});
  fs::resize_file(bin, 2 * sizeof(double));
  try {
    load_checkpoint(bin);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}

TEST(Checkpoint, MalformedSidecarIsAnIoError) {
  const fs::path bin = scratch("bad.bin");
  save_checkpoint(bin, LayeredParams({{"x", {1.0}}}), {1, "stage1"});
  std::ofstream(sidecar_path(bin)) << "{not json";
  try {
    load_checkpoint(bin);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

}  // namespace
}  // namespace zorefine
