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

#include "zorefine/sensitivity.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <vector>

#include "support/oracles.hpp"
#include "zorefine/error.hpp"
#include "zorefine/mlp.hpp"
#include "zorefine/parallel.hpp"
#include "zorefine/perturbations.hpp"

namespace zorefine {
namespace {

LayeredParams shape_of(std::size_t layers) {
  std::vector<LayerBlock> blocks;
  for (std::size_t l = 0; l < layers; ++l) blocks.push_back({"l" + std::to_string(l), {0.0}});
  return LayeredParams(std::move(blocks));
}

TEST(CombinedScore, Examples) {
  EXPECT_DOUBLE_EQ(combined_score(0.3, 0.2, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(combined_score(0.3, 0.2, 0.0), 0.3);
  EXPECT_DOUBLE_EQ(combined_score(1.0, -0.5, 2.0), 0.0);
  EXPECT_THROW(combined_score(1.0, 1.0, -1.0), Error);
}

TEST(CombinedScore, MonotoneInEachArgument) {
  RandomStream rng(1, 99, 0, 0);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.normal(), b = rng.normal(), lam = rng.uniform() * 3;
    const double da = std::abs(rng.normal()), db = std::abs(rng.normal());
    EXPECT_LE(combined_score(a, b, lam), combined_score(a + da, b, lam));
    EXPECT_LE(combined_score(a, b, lam), combined_score(a, b + db, lam));
  }
}

TEST(TopM, Examples) {
  const std::vector<double> s{0.1, 0.9, 0.5, 0.7};
  EXPECT_EQ(top_m_layers(s, 2, shape_of(4)).selected(), (std::vector<std::size_t>{1, 3}));
  const std::vector<double> eq(4, 1.0);
  EXPECT_EQ(top_m_layers(eq, 2, shape_of(4)).selected(), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(top_m_layers(s, 4, shape_of(4)), LayerMask::all(shape_of(4)));
}

TEST(TopM, BadM) {
  const std::vector<double> s{0.1, 0.9};
  for (std::size_t m : {0u, 3u}) {
    try {
      top_m_layers(s, m, shape_of(2));
      FAIL() << "expected an error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kBadM);
    }
  }
  EXPECT_THROW(top_m_layers(s, 1, shape_of(3)), Error);
}

TEST(TopM, NegativeScoresAreRankedAsIs) {
  const std::vector<double> s{-0.5, -0.1, -2.0};
  EXPECT_EQ(top_m_layers(s, 1, shape_of(3)).selected(), (std::vector<std::size_t>{1}));
}

TEST(TopM, PermutationConsistent) {
  RandomStream rng(2, 99, 0, 0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(7);
    for (auto& x : s) x = rng.normal();
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 6; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<double> permuted(7);
    for (std::size_t i = 0; i < 7; ++i) permuted[perm[i]] = s[i];
    const LayerMask a = top_m_layers(s, 3, shape_of(7));
    const LayerMask b = top_m_layers(permuted, 3, shape_of(7));
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(a.contains(i), b.contains(perm[i]));
  }
}

TEST(Normalize, Examples) {
  const std::vector<double> s{2, 4, 6};
  EXPECT_EQ(minmax_normalize(s), (std::vector<double>{0.0, 0.5, 1.0}));
  const std::vector<double> one{5};
  EXPECT_EQ(minmax_normalize(one), (std::vector<double>{0.0}));
  const std::vector<double> empty;
  EXPECT_THROW(minmax_normalize(empty), Error);
}

TEST(Normalize, PreservesOrderAndSpansUnitInterval) {
  RandomStream rng(3, 99, 0, 0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(6);
    for (auto& x : s) x = rng.normal();
    const auto n = minmax_normalize(s);
    EXPECT_EQ(std::max_element(n.begin(), n.end()) - n.begin(),
              std::max_element(s.begin(), s.end()) - s.begin());
    EXPECT_EQ(*std::min_element(n.begin(), n.end()), 0.0);
    EXPECT_EQ(*std::max_element(n.begin(), n.end()), 1.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[i] < s[j]) EXPECT_LT(n[i], n[j]);
      }
    }
  }
}

// For f = 1/2 theta^T A theta, perturbing one block by rho v changes f by
// rho (A theta)_l . v + rho^2/2 v^T A_ll v, whose mean is rho^2/2 tr(A_ll).
TEST(NoiseSensitivity, QuadraticFormMean) {
  const QuadraticObjective q = diagonal_quadratic({4.0, 1.0, 2.0, 3.0}, {1, 3});
  const LayeredParams theta = unflatten(std::vector<double>{0.5, -1.0, 0.2, 0.3}, q.layout());
  const double rho = 0.1;
  for (std::size_t l = 0; l < 2; ++l) {
    const double trace_block = (l == 0) ? 4.0 : 6.0;
    const MonteCarloEstimate est =
        noise_sensitivity(q, theta, l, rho, 10000, RngKey{4, Purpose::kNoiseSensitivity, 0});
    EXPECT_LE(std::abs(est.mean - 0.5 * rho * rho * trace_block), 3.0 * est.std_err) << l;
  }
}

TEST(NoiseSensitivity, FlatLayerScoresZero) {
  const QuadraticObjective q = diagonal_quadratic({4.0, 0.0}, {1, 1});
  const LayeredParams theta = unflatten(std::vector<double>{1.0, 0.0}, q.layout());
  const MonteCarloEstimate est = noise_sensitivity(q, theta, 1, 0.5, 100, RngKey{});
  EXPECT_EQ(est.mean, 0.0);
}

TEST(NoiseSensitivity, VanishesAsRhoShrinks) {
  const QuadraticObjective q = diagonal_quadratic({4.0, 1.0}, {1, 1});
  const LayeredParams theta = unflatten(std::vector<double>{1.0, 1.0}, q.layout());
  const MonteCarloEstimate est = noise_sensitivity(q, theta, 0, 1e-6, 64, RngKey{});
  // Gradient scale is 4, so the first-order term is at most a few times 4e-6.
  EXPECT_LE(std::abs(est.mean), 1e-6 * 4.0 * 4.0);
}

TEST(NoiseSensitivity, Validation) {
  const QuadraticObjective q = diagonal_quadratic({4.0, 1.0}, {1, 1});
  EXPECT_THROW(noise_sensitivity(q, q.layout(), 0, 0.0, 4, RngKey{}), Error);
  EXPECT_THROW(noise_sensitivity(q, q.layout(), 0, 0.1, 0, RngKey{}), Error);
  EXPECT_THROW(noise_sensitivity(q, q.layout(), 2, 0.1, 4, RngKey{}), Error);
}

TEST(QuantSensitivity, GridPointsScoreZero) {
  const QuadraticObjective q = diagonal_quadratic({4.0, 1.0, 1.0}, {1, 2});
  const std::vector<double> raw{-1.0, 0.44};
  const LayeredParams theta = q.layout().with_block(1, quantize_block(raw, 4));
  EXPECT_EQ(quant_sensitivity(q, theta, 1, 4), 0.0);
}

TEST(QuantSensitivity, MatchesCompositionalRecomputation) {
  auto data = std::make_shared<const Dataset>(make_refusal_dataset(2, 60, 4));
  const MlpObjective mlp(MlpSpec{{4, 6, 6, 2}, std::nullopt, std::nullopt}, data);
  const LayeredParams p = mlp.initialize(RngKey{2, Purpose::kInit, 0});
  const Batch all = Batch::full(data->size());
  for (std::size_t l = 0; l < 3; ++l) {
    const LayeredParams qp = quantize_model(p, Quantization{4, std::nullopt, std::vector<std::size_t>{l}});
    EXPECT_EQ(quant_sensitivity(mlp, p, l, 4, all), mlp.value(qp, all) - mlp.value(p, all));
  }
}

TEST(QuantSensitivity, EightBitsUsuallyHurtLessThanFour) {
  auto data = std::make_shared<const Dataset>(make_refusal_dataset(3, 60, 4));
  const MlpObjective mlp(MlpSpec{{4, 8, 8, 2}, std::nullopt, std::nullopt}, data);
  const Batch all = Batch::full(data->size());
  int ok = 0, total = 0;
  for (std::uint32_t s = 0; s < 20; ++s) {
    const LayeredParams p = mlp.initialize(RngKey{s, Purpose::kInit, 0});
    for (std::size_t l = 0; l < 3; ++l) {
      ok += std::abs(quant_sensitivity(mlp, p, l, 8, all)) <=
            std::abs(quant_sensitivity(mlp, p, l, 4, all));
      ++total;
    }
  }
  EXPECT_GE(ok, 0.9 * total);
}

TEST(Snip, DiagonalExample) {
  const QuadraticObjective q = diagonal_quadratic({4.0, 1.0}, {2});
  const LayeredParams theta = unflatten(std::vector<double>{1.0, 1.0}, q.layout());
  EXPECT_EQ(snip_layer_scores(q, theta, {}), (std::vector<double>{5.0}));
  EXPECT_EQ(snip_layer_scores(q, LayeredParams::zeros_like(theta), {}), (std::vector<double>{0.0}));
}

TEST(Snip, NeedsGradient) {
  struct NoGrad final : Objective {
    LayeredParams shape{{{"x", {0.0}}}};
    ObjectiveDescriptor desc{"nograd", {}};
    double value(const LayeredParams&, const Batch&) const override { return 0.0; }
    const ObjectiveDescriptor& descriptor() const override { return desc; }
    const LayeredParams& layout() const override { return shape; }
  } obj;
  try {
    snip_layer_scores(obj, obj.shape, {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGradUnavailable);
  }
}

TEST(Wanda, MatchesDenseRecomputation) {
  auto data = std::make_shared<const Dataset>(make_refusal_dataset(4, 20, 2));
  const MlpObjective mlp(MlpSpec{{2, 2, 2}, std::nullopt, std::nullopt}, data);
  const LayeredParams p = mlp.initialize(RngKey{4, Purpose::kInit, 0});
  const Batch batch{{0, 1, 2, 5, 8}};
  std::vector<std::vector<double>> blocks;
  for (std::size_t l = 0; l < 2; ++l) blocks.emplace_back(p.block(l).begin(), p.block(l).end());
  std::vector<std::vector<double>> col_sq(2, std::vector<double>(2, 0.0));
  for (std::size_t r : batch.indices) {
    const std::vector<double> x{data->inputs(static_cast<Eigen::Index>(r), 0),
                                data->inputs(static_cast<Eigen::Index>(r), 1)};
    const auto acts = oracle::mlp_activations(blocks, {2, 2, 2}, x);
    for (std::size_t l = 0; l < 2; ++l) {
      for (std::size_t c = 0; c < 2; ++c) col_sq[l][c] += acts[l][c] * acts[l][c];
    }
  }
  const std::vector<double> got = wanda_layer_scores(mlp, p, batch);
  for (std::size_t l = 0; l < 2; ++l) {
    double expected = 0.0;
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 2; ++c) {
        expected += std::abs(blocks[l][r * 2 + c]) * std::sqrt(col_sq[l][c]);
      }
    }
    EXPECT_NEAR(got[l], expected, 1e-12);
  }
}

TEST(Wanda, HomogeneousInTheLayerWeights) {
  auto data = std::make_shared<const Dataset>(make_refusal_dataset(5, 40, 3));
  const MlpObjective mlp(MlpSpec{{3, 4, 4, 2}, std::nullopt, std::nullopt}, data);
  const LayeredParams p = mlp.initialize(RngKey{5, Purpose::kInit, 0});
  const Batch all = Batch::full(data->size());
  std::vector<double> doubled(p.block(2).begin(), p.block(2).end());
  for (auto& x : doubled) x *= 2.0;
  // The last layer's inputs do not depend on its own weights.
  EXPECT_NEAR(wanda_layer_scores(mlp, p.with_block(2, doubled), all)[2],
              2.0 * wanda_layer_scores(mlp, p, all)[2], 1e-12);
}

TEST(Wanda, ZeroInputsScoreZero) {
  auto data = std::make_shared<const Dataset>(make_refusal_dataset(5, 40, 3));
  const MlpObjective mlp(MlpSpec{{3, 4, 2}, std::nullopt, std::nullopt}, data);
  const LayeredParams p = mlp.initialize(RngKey{5, Purpose::kInit, 0});
  // Zero first-layer weights and biases make every input of layer 1 tanh(0).
  const LayeredParams z = p.with_block(0, std::vector<double>(p.layer_size(0), 0.0));
  EXPECT_EQ(wanda_layer_scores(mlp, z, Batch::full(data->size()))[1], 0.0);
}

TEST(Wanda, NeedsActivations) {
  const QuadraticObjective q = diagonal_quadratic({1.0}, {1});
  try {
    wanda_layer_scores(q, q.layout(), {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kActivationsUnavailable);
  }
}

TEST(ScoreLayers, ReportSelectsTopMAndWritesCsv) {
  const QuadraticObjective q = diagonal_quadratic({4.0, 1.0, 9.0, 0.5}, {1, 1, 1, 1});
  const LayeredParams theta = unflatten(std::vector<double>{0.0, 0.0, 0.0, 0.0}, q.layout());
  SensitivityConfig cfg;
  cfg.m = 2;
  cfg.rho = 0.1;
  cfg.n_trials = 256;
  const SensitivityReport r =
      score_layers(q, theta, {}, cfg, RngKey{6, Purpose::kNoiseSensitivity, 0});
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.selected.selected(), (std::vector<std::size_t>{0, 2}));
  for (const auto& row : r.rows) EXPECT_EQ(row.s_quant, 0.0);
  std::ostringstream out;
  write_csv(r, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "layer_index,layer_name,s_noise,s_quant,s_combined,normalized,selected");
  int ones = 0, rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    ones += line.back() == '1';
  }
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(ones, 2);
}

TEST(ScoreLayers, IndependentOfThreadCount) {
  const QuadraticObjective q = diagonal_quadratic({4.0, 1.0, 9.0}, {1, 1, 1});
  const LayeredParams theta = unflatten(std::vector<double>{1.0, 0.5, -0.5}, q.layout());
  SensitivityConfig cfg;
  cfg.m = 1;
  const RngKey key{7, Purpose::kNoiseSensitivity, 0};
  set_thread_limit(1);
  const auto a = score_layers(q, theta, {}, cfg, key).combined();
  set_thread_limit(3);
  const auto b = score_layers(q, theta, {}, cfg, key).combined();
  set_thread_limit(0);
  EXPECT_EQ(a, b);
}

TEST(Overlap, CountsCommonLayers) {
  const LayeredParams s = shape_of(5);
  EXPECT_EQ(overlap(LayerMask::of(s, {0, 1, 3}), LayerMask::of(s, {1, 3, 4})), 2u);
  EXPECT_EQ(overlap(LayerMask::none(s), LayerMask::all(s)), 0u);
}

}  // namespace
}  // namespace zorefine
