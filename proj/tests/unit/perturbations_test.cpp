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

#include "zorefine/perturbations.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "support/oracles.hpp"
#include "zorefine/error.hpp"
#include "zorefine/mlp.hpp"

namespace zorefine {
namespace {

std::vector<double> random_block(RandomStream& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> w(n);
  for (auto& x : w) x = scale * rng.normal();
  return w;
}

TEST(Quantize, HandWorkedFourBit) {
  const std::vector<double> w{-1.0, 0.5};
  const std::vector<double> q = quantize_block(w, 4);
  EXPECT_EQ(q[0], -1.0);
  EXPECT_NEAR(q[1], 4.0 / 7.0, 1e-15);
}

TEST(Quantize, AllZeroBlockStaysZero) {
  const std::vector<double> w(5, 0.0);
  for (double x : quantize_block(w, 4)) EXPECT_EQ(x, 0.0);
}

TEST(Quantize, MatchesNearestLevelOracle) {
  RandomStream rng(1, 99, 0, 0);
  for (int bits = 2; bits <= 8; ++bits) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::vector<double> w = random_block(rng, 33, 0.1 + trial);
      const std::vector<double> lib = quantize_block(w, bits);
      const std::vector<double> ref = oracle::nearest_level_quantize(w, bits);
      for (std::size_t i = 0; i < w.size(); ++i) {
        EXPECT_NEAR(lib[i], ref[i], 1e-12 * (1.0 + std::abs(ref[i]))) << "bits " << bits;
      }
    }
  }
}

TEST(Quantize, IdempotentBitExact) {
  RandomStream rng(2, 99, 0, 0);
  for (int bits = 2; bits <= 8; ++bits) {
    for (int trial = 0; trial < 50; ++trial) {
      const std::vector<double> q = quantize_block(random_block(rng, 17), bits);
      EXPECT_EQ(quantize_block(q, bits), q);
    }
  }
}

TEST(Quantize, AtMostTwoToTheBitsMinusOneLevels) {
  RandomStream rng(3, 99, 0, 0);
  for (int bits = 2; bits <= 8; ++bits) {
    const std::vector<double> q = quantize_block(random_block(rng, 5000), bits);
    const std::set<double> levels(q.begin(), q.end());
    EXPECT_LE(levels.size(), static_cast<std::size_t>((1 << bits) - 1));
  }
}

TEST(Quantize, ErrorAtMostHalfStepAndExactAtEnds) {
  RandomStream rng(4, 99, 0, 0);
  for (int bits = 2; bits <= 8; ++bits) {
    std::vector<double> w = random_block(rng, 200);
    w[7] = 0.0;
    double max_abs = 0.0;
    for (double x : w) max_abs = std::max(max_abs, std::abs(x));
    const double step = max_abs / ((1 << (bits - 1)) - 1);
    const std::vector<double> q = quantize_block(w, bits);
    for (std::size_t i = 0; i < w.size(); ++i) {
      EXPECT_LE(std::abs(q[i] - w[i]), step / 2 * (1 + 1e-12));
      if (std::abs(w[i]) == max_abs) EXPECT_EQ(q[i], w[i]);
    }
    EXPECT_EQ(q[7], 0.0);
  }
}

TEST(Quantize, EightBitOnUnitRange) {
  std::vector<double> w;
  for (int i = -100; i <= 100; ++i) w.push_back(i / 100.0 + (i % 3) * 1e-4);
  w.front() = -1.0;
  const std::vector<double> q = quantize_block(w, 8);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(std::abs(q[i] - w[i]), 1.0 / 254 + 1e-15);
}

TEST(Quantize, RejectsBitsOutOfRange) {
  const std::vector<double> w{1.0};
  EXPECT_THROW(quantize_block(w, 1), Error);
  EXPECT_THROW(quantize_block(w, 9), Error);
}

TEST(QuantizeModel, LayerSubsetOnlyTouchesThoseLayers) {
  RandomStream rng(5, 99, 0, 0);
  const LayeredParams p({{"a", random_block(rng, 6)}, {"b", random_block(rng, 4)},
                         {"c", random_block(rng, 3)}});
  const LayeredParams q = quantize_model(p, Quantization{4, std::nullopt, std::vector<std::size_t>{1}});
  EXPECT_EQ(std::vector<double>(q.block(0).begin(), q.block(0).end()),
            std::vector<double>(p.block(0).begin(), p.block(0).end()));
  EXPECT_NE(std::vector<double>(q.block(1).begin(), q.block(1).end()),
            std::vector<double>(p.block(1).begin(), p.block(1).end()));
  EXPECT_EQ(std::vector<double>(q.block(2).begin(), q.block(2).end()),
            std::vector<double>(p.block(2).begin(), p.block(2).end()));
  EXPECT_EQ(quantize_model(p, Quantization{4, std::nullopt, std::vector<std::size_t>{}}), p);
}

TEST(WeightNoise, ZeroSigmaIsIdentity) {
  RandomStream rng(6, 99, 0, 0);
  const LayeredParams p({{"a", random_block(rng, 10)}});
  EXPECT_EQ(add_weight_noise(p, 0.0, rng), p);
}

TEST(WeightNoise, VarianceMatchesSigmaSquared) {
  const LayeredParams p({{"a", std::vector<double>(10000, 0.5)}});
  auto deviation_variance = [&](double sigma) {
    RandomStream rng(7, 99, 0, 0);
    const auto noisy = flatten(add_weight_noise(p, sigma, rng));
    double s = 0.0;
    for (double x : noisy) s += (x - 0.5) * (x - 0.5);
    return s / static_cast<double>(noisy.size());
  };
  const double v1 = deviation_variance(1.0);
  const double v2 = deviation_variance(2.0);
  EXPECT_NEAR(v1, 1.0, 0.05);
  EXPECT_NEAR(v2 / v1, 4.0, 0.2);
}

TEST(WeightNoise, SameStreamSameNoise) {
  const LayeredParams p({{"a", std::vector<double>(50, 0.0)}});
  RandomStream a(8, 99, 0, 0);
  RandomStream b(8, 99, 0, 0);
  EXPECT_EQ(add_weight_noise(p, 1.0, a), add_weight_noise(p, 1.0, b));
}

TEST(PerturbSpec, CanonicalFormsRoundTrip) {
  for (const char* s : {"none", "wnoise:1.5", "anoise:0.08", "quant:w4a16", "quant:w4a4",
                        "quant:w8a16@0,2"}) {
    EXPECT_EQ(PerturbSpec::parse(s).to_string(), s);
    EXPECT_EQ(PerturbSpec::parse(PerturbSpec::parse(s).to_string()), PerturbSpec::parse(s));
  }
}

TEST(PerturbSpec, ParsedFields) {
  const auto q = std::get<Quantization>(PerturbSpec::parse("quant:w4a4").kind());
  EXPECT_EQ(q.weight_bits, 4);
  EXPECT_EQ(q.act_bits, 4);
  const auto q16 = std::get<Quantization>(PerturbSpec::parse("quant:w4a16").kind());
  EXPECT_FALSE(q16.act_bits.has_value());
  EXPECT_DOUBLE_EQ(PerturbSpec::parse("wnoise:2").level(), 2.0);
  EXPECT_TRUE(PerturbSpec::parse("anoise:0.05").is_stochastic());
  EXPECT_FALSE(PerturbSpec::parse("quant:w4a16").is_stochastic());
}

TEST(PerturbSpec, RejectsMalformedText) {
  for (const char* s : {"", "noise:1", "wnoise:", "wnoise:-1", "quant:4", "quant:w1a16",
                        "quant:w4a99", "anoise:abc", "wnoise:0"}) {
    EXPECT_THROW(PerturbSpec::parse(s), Error) << s;
  }
}

TEST(Apply, WeightNoiseDelegatesToAddWeightNoise) {
  const LayeredParams p({{"a", std::vector<double>(20, 1.0)}});
  const RngKey key{9, Purpose::kWeightNoise, 3};
  RandomStream rng = key.stream(0);
  EXPECT_EQ(apply(p, PerturbSpec(WeightNoise{1.0}), std::nullopt, key).params,
            add_weight_noise(p, 1.0, rng));
}

TEST(Apply, WeightOnlyQuantizationLeavesActivationsAlone) {
  const MlpSpec spec{{4, 3, 2}, std::nullopt, std::nullopt};
  const LayeredParams p({{"dense0", std::vector<double>(15, 0.3)}, {"dense1", std::vector<double>(8, 0.2)}});
  const Perturbation out = apply(p, PerturbSpec::parse("quant:w4a16"), spec, RngKey{});
  ASSERT_TRUE(out.model.has_value());
  EXPECT_FALSE(out.model->activation_bits.has_value());
  EXPECT_FALSE(out.model->activation_noise.has_value());
  const Perturbation a4 = apply(p, PerturbSpec::parse("quant:w4a4"), spec, RngKey{});
  EXPECT_EQ(a4.model->activation_bits, 4);
}

TEST(Apply, ActivationNoiseAugmentsTheModelNotTheWeights) {
  const MlpSpec spec{{4, 3, 2}, std::nullopt, std::nullopt};
  const LayeredParams p({{"dense0", std::vector<double>(15, 0.3)}, {"dense1", std::vector<double>(8, 0.2)}});
  const Perturbation out = apply(p, PerturbSpec::parse("anoise:0.05"), spec, RngKey{});
  EXPECT_EQ(out.params, p);
  ASSERT_TRUE(out.model->activation_noise.has_value());
  EXPECT_DOUBLE_EQ(out.model->activation_noise->alpha, 0.05);
}

TEST(Apply, ActivationNoiseOnAnalyticObjectiveIsAnError) {
  const LayeredParams p({{"x", {1.0}}});
  try {
    apply(p, PerturbSpec::parse("anoise:0.05"), std::nullopt, RngKey{});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kActivationNoiseOnAnalyticObjective);
  }
}

TEST(Apply, InputIsNeverModified) {
  RandomStream rng(10, 99, 0, 0);
  const LayeredParams p({{"a", random_block(rng, 30)}});
  const LayeredParams copy = p;
  for (const char* s : {"wnoise:1", "quant:w4a16", "none"}) {
    apply(p, PerturbSpec::parse(s), std::nullopt, RngKey{});
    EXPECT_EQ(p, copy);
  }
}

}  // namespace
}  // namespace zorefine
