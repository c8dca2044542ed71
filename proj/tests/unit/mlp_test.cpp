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

#include "zorefine/mlp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "support/oracles.hpp"
#include "zorefine/error.hpp"
#include "zorefine/objectives.hpp"
#include "zorefine/trainer.hpp"

namespace zorefine {
namespace {

std::shared_ptr<const Dataset> small_data(std::uint64_t seed = 1, std::size_t n = 40,
                                          std::size_t k = 4) {
  return std::make_shared<const Dataset>(make_refusal_dataset(seed, n, k));
}

MlpObjective small_mlp(std::shared_ptr<const Dataset> data) {
  return MlpObjective(MlpSpec{{data->num_features(), 5, 3, 2}, std::nullopt, std::nullopt}, data);
}

std::vector<std::vector<double>> blocks_of(const LayeredParams& p) {
  std::vector<std::vector<double>> out;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    out.emplace_back(p.block(l).begin(), p.block(l).end());
  }
  return out;
}

TEST(RefusalDataset, Deterministic) {
  const Dataset a = make_refusal_dataset(3, 200, 6);
  const Dataset b = make_refusal_dataset(3, 200, 6);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.harmful, b.harmful);
  EXPECT_NE(a.inputs, make_refusal_dataset(4, 200, 6).inputs);
}

TEST(RefusalDataset, ShapeAndHarmfulSubset) {
  const Dataset d = make_refusal_dataset(3, 200, 6);
  EXPECT_EQ(d.size(), 200u);
  EXPECT_EQ(d.num_features(), 6u);
  EXPECT_FALSE(d.harmful_indices().empty());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.harmful[i], d.labels[i] == kRefuse);
  }
}

TEST(RefusalDataset, RejectsTinyInputs) {
  EXPECT_THROW(make_refusal_dataset(1, 19, 4), Error);
  EXPECT_THROW(make_refusal_dataset(1, 40, 1), Error);
}

TEST(RefusalDataset, CsvHasHeaderAndOneLinePerRow) {
  const Dataset d = make_refusal_dataset(3, 20, 2);
  std::ostringstream out;
  write_csv(d, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x0,x1,label,harmful_flag");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 20);
}

TEST(Mlp, ZeroFinalLayerGivesLogTwo) {
  auto data = small_data();
  const MlpObjective mlp = small_mlp(data);
  LayeredParams p = mlp.initialize(RngKey{1, Purpose::kInit, 0});
  p = p.with_block(2, std::vector<double>(p.layer_size(2), 0.0));
  EXPECT_NEAR(mlp.value(p, Batch::full(data->size())), std::log(2.0), 1e-9);
}

TEST(Mlp, LossMatchesLoopOracle) {
  auto data = small_data();
  const MlpObjective mlp = small_mlp(data);
  const LayeredParams p = mlp.initialize(RngKey{2, Purpose::kInit, 0});
  const auto blocks = blocks_of(p);
  double total = 0.0;
  for (std::size_t i = 0; i < data->size(); ++i) {
    std::vector<double> x(data->num_features());
    for (std::size_t c = 0; c < x.size(); ++c) {
      x[c] = data->inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    }
    const auto acts = oracle::mlp_activations(blocks, mlp.spec().widths, x);
    total += oracle::cross_entropy(acts.back(), data->labels[i]);
  }
  EXPECT_NEAR(mlp.value(p, Batch::full(data->size())), total / data->size(), 1e-12);
}

TEST(Mlp, GradientMatchesFiniteDifferencesAtRandomPoints) {
  auto data = small_data();
  const MlpObjective mlp = small_mlp(data);
  const Batch batch{{0, 3, 4, 7, 10, 21}};
  for (std::uint32_t trial = 0; trial < 20; ++trial) {
    const LayeredParams p = mlp.initialize(RngKey{trial, Purpose::kInit, 0});
    RandomStream rng(trial, 99, 0, 0);
    // Nonzero biases so every block is exercised.
    const LayeredParams q = axpy(p, sample_masked_direction(p, LayerMask::all(p), rng), 0.1);
    EXPECT_LE(check_gradient(mlp, q, batch), 1e-5) << "trial " << trial;
  }
}

TEST(Mlp, ZeroAlphaActivationNoiseIsBitIdentical) {
  auto data = small_data();
  const MlpObjective mlp = small_mlp(data);
  MlpSpec noisy = mlp.spec();
  noisy.activation_noise = ActivationNoiseSpec{0.0, RngKey{5, Purpose::kActivationNoise, 0}};
  const MlpObjective with_noise = mlp.with_spec(noisy);
  const LayeredParams p = mlp.initialize(RngKey{3, Purpose::kInit, 0});
  const Batch all = Batch::full(data->size());
  EXPECT_EQ(mlp.value(p, all), with_noise.value(p, all));
}

TEST(Mlp, ActivationNoiseIsKeyedAndChangesLoss) {
  auto data = small_data();
  const MlpObjective mlp = small_mlp(data);
  MlpSpec noisy = mlp.spec();
  noisy.activation_noise = ActivationNoiseSpec{0.5, RngKey{5, Purpose::kActivationNoise, 0}};
  const MlpObjective a = mlp.with_spec(noisy);
  const MlpObjective b = mlp.with_spec(noisy);
  const LayeredParams p = mlp.initialize(RngKey{3, Purpose::kInit, 0});
  const Batch all = Batch::full(data->size());
  EXPECT_EQ(a.value(p, all), b.value(p, all));
  EXPECT_NE(a.value(p, all), mlp.value(p, all));
  EXPECT_FALSE(a.has_gradient());
  EXPECT_THROW(a.gradient(p, all), Error);
}

TEST(Mlp, LayerInputsMatchLoopOracle) {
  auto data = small_data();
  const MlpObjective mlp = small_mlp(data);
  const LayeredParams p = mlp.initialize(RngKey{4, Purpose::kInit, 0});
  const Batch batch{{1, 2, 9}};
  const auto inputs = mlp.layer_inputs(p, batch);
  const auto blocks = blocks_of(p);
  for (std::size_t r = 0; r < batch.indices.size(); ++r) {
    std::vector<double> x(data->num_features());
    for (std::size_t c = 0; c < x.size(); ++c) {
      x[c] = data->inputs(static_cast<Eigen::Index>(batch.indices[r]), static_cast<Eigen::Index>(c));
    }
    const auto acts = oracle::mlp_activations(blocks, mlp.spec().widths, x);
    for (std::size_t l = 0; l < inputs.size(); ++l) {
      for (std::size_t c = 0; c < acts[l].size(); ++c) {
        EXPECT_NEAR(inputs[l](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)),
                    acts[l][c], 1e-14);
      }
    }
  }
}

TEST(Mlp, RejectsMismatchedInputWidth) {
  auto data = small_data();
  EXPECT_THROW(MlpObjective(MlpSpec{{3, 4, 2}, std::nullopt, std::nullopt}, data), Error);
  EXPECT_THROW(MlpObjective(MlpSpec{{4, 2}, std::nullopt, std::nullopt}, data), Error);
}

TEST(Mlp, EmptyBatchIsAnError) {
  auto data = small_data();
  const MlpObjective mlp = small_mlp(data);
  EXPECT_THROW(mlp.value(mlp.initialize(RngKey{}), Batch{}), Error);
}

TEST(Mlp, ForwardOnlyStorageIsSmallerThanBackprop) {
  auto data = small_data();
  const MlpObjective mlp(MlpSpec{{4, 16, 16, 16, 16, 2}, std::nullopt, std::nullopt}, data);
  const auto s = mlp.activation_storage(8);
  EXPECT_EQ(s.backprop, 8u * (4 + 16 * 4 + 2));
  EXPECT_EQ(s.forward_only, 8u * 32);
  EXPECT_LT(s.forward_only, s.backprop);
}

TEST(Mlp, HundredFoStepsReachNinetyFivePercent) {
  auto data = std::make_shared<const Dataset>(make_refusal_dataset(0, 800, 8));
  const MlpObjective mlp(MlpSpec{{8, 16, 16, 16, 16, 16, 16, 2}, std::nullopt, std::nullopt},
                         data);
  const LayeredParams init = mlp.initialize(RngKey{0, Purpose::kInit, 0});
  FoConfig cfg;
  const TrainResult r = fo_align(mlp, init, cfg, RngKey{0, Purpose::kBatch, 0});
  ASSERT_FALSE(r.aborted);
  const Batch all = Batch::full(data->size());
  EXPECT_LT(mlp.value(r.params, all), mlp.value(init, all));
  EXPECT_GE(mlp.accuracy(r.params, all), 0.95);
}

}  // namespace
}  // namespace zorefine
