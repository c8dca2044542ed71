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

// Counter-based random numbers.
//
// Every random draw in the library is addressed by a tuple
// (global seed, purpose tag, step, sample index). The tuple selects an
// independent Philox4x32-10 stream, so the value of a draw never depends on
// how many other draws happened before it or on which thread made it.

#ifndef ZOREFINE_RNG_HPP_
#define ZOREFINE_RNG_HPP_

#include <array>
#include <cstddef>
#include <cstdint>

namespace zorefine {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key);
};

enum class Purpose : std::uint32_t {
  kInit = 1,
  kData = 2,
  kBatch = 3,
  kZoDirection = 4,
  kWeightNoise = 5,
  kActivationNoise = 6,
  kNoiseSensitivity = 7,
  kRobustnessGap = 8,
  kSmoothing = 9,
  kVerify = 10,
  kTest = 99,
};

/// A single sequential stream. Cheap to copy; copying snapshots the state.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t purpose, std::uint32_t step,
               std::uint32_t index);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal via Box-Muller; pairs are cached.
  double normal();
  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  void refill();

  Philox4x32::Key key_;
  Philox4x32::Counter counter_;
  Philox4x32::Counter buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Names a family of streams; `stream(i)` is the i-th member.
struct RngKey {
  std::uint64_t seed = 0;
  Purpose purpose = Purpose::kTest;
  std::uint32_t step = 0;

  RandomStream stream(std::uint32_t index) const {
    return RandomStream(seed, static_cast<std::uint32_t>(purpose), step, index);
  }
  RngKey with_purpose(Purpose p) const { return {seed, p, step}; }
  RngKey at_step(std::uint32_t s) const { return {seed, purpose, s}; }
};

/// splitmix64 finalizer, used to spread user seeds over the Philox key space.
std::uint64_t mix64(std::uint64_t x);

}  // namespace zorefine

#endif  // ZOREFINE_RNG_HPP_
