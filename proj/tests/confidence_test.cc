// Copyright 2026 The OODGate Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <vector>

#include "oodgate/confidence.h"
#include "oodgate/model.h"
#include "test_util.h"

namespace oodgate {
namespace {

using testing::RandomTensor;
using testing::RandomVector;

// Record whose logits equal W f + b exactly as the scores recompute them.
LogitRecord RandomRecord(CounterRng& rng, std::size_t k, std::size_t m) {
  Tensor w = RandomTensor(rng, {k, m});
  Tensor b = RandomTensor(rng, {k}, -0.5, 0.5);
  Tensor f = RandomTensor(rng, {m}, 0.0, 3.0);
  Tensor logits({k});
  for (std::size_t y = 0; y < k; ++y) {
    double s = b[y];
    for (std::size_t i = 0; i < m; ++i) s += w[y * m + i] * f[i];
    logits[y] = s;
  }
  return LogitRecord::Make(std::move(logits), std::move(f), std::move(w), std::move(b));
}

TEST(Confidence, FrozenValues) {
  const LogitRecord r = LogitRecord::Make(
      Tensor::Vector({1.0, 2.0, 3.0}), Tensor::Vector({0.5, -1.0, 2.0}),
      Tensor(Shape{3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}), Tensor::Vector({0, 0, 0}));
  EXPECT_NEAR(ScoreMcp(r), 0.6652409557748218, 1e-15);
  EXPECT_NEAR(ScoreShannonEntropy(r), -0.8323955818399389, 1e-15);
  EXPECT_EQ(ScoreMaxLogit(r), 3.0);
  EXPECT_NEAR(ScoreEnergy(r), 3.40760596444438, 1e-14);
  EXPECT_NEAR(ScoreEnergy(r, 2.0), 4.360539341283469, 1e-14);
  EXPECT_NEAR(ScoreGradNorm(r), 2.3233533570904195, 1e-14);
}

TEST(Confidence, FrozenDiceAndReact) {
  const Tensor w(Shape{2, 4}, {0.5, -1.0, 2.0, 0.1, 1.5, 0.3, -0.2, 0.7});
  const Tensor b = Tensor::Vector({0.1, -0.2});
  const Tensor f = Tensor::Vector({1.0, 2.0, 0.5, 3.0});
  Tensor logits({2});
  for (std::size_t y = 0; y < 2; ++y) {
    logits[y] = b[y];
    for (std::size_t i = 0; i < 4; ++i) logits[y] += w[y * 4 + i] * f[i];
  }
  const LogitRecord r = LogitRecord::Make(logits, f, w, b);
  const std::vector<double> mean = {0.8, 1.0, 1.2, 0.4};
  EXPECT_EQ(DiceMask(mean, w, 0.5), (std::vector<std::uint8_t>{1, 0, 1, 0, 1, 1, 0, 0}));
  EXPECT_NEAR(ScoreDice(r, mean, 0.5), 2.4543552444685273, 1e-14);
  EXPECT_NEAR(ScoreReact(r, 1.5), 2.782771522453552, 1e-14);
}

TEST(Confidence, ScoresFollowTheConvention) {
  const LogitRecord peaked = LogitRecord::Make(Tensor::Vector({8.0, 0.0}));
  const LogitRecord flat = LogitRecord::Make(Tensor::Vector({0.1, 0.0}));
  EXPECT_GT(ScoreMcp(peaked), ScoreMcp(flat));
  EXPECT_GT(ScoreShannonEntropy(peaked), ScoreShannonEntropy(flat));
  EXPECT_GT(ScoreMaxLogit(peaked), ScoreMaxLogit(flat));
  EXPECT_GT(ScoreEnergy(peaked), ScoreEnergy(flat));
}

TEST(Confidence, EnergyIsStable) {
  EXPECT_NEAR(EnergyOfLogits(std::vector<double>{1000.0, 1000.0}), 1000.0 + std::log(2.0),
              1e-12);
  EXPECT_TRUE(std::isfinite(EnergyOfLogits(std::vector<double>{-1000.0, -1001.0})));
  EXPECT_EQ(Entropy(std::vector<double>{1.0, 0.0}), 0.0);
}

TEST(Confidence, ExactEquivalences) {
  CounterRng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const LogitRecord r = RandomRecord(rng, 2 + rng.Below(4), 3 + rng.Below(6));
    const std::vector<double> mean = RandomVector(rng, r.penultimate_features.size(), 0.0, 1.0);
    worst = std::max(worst, std::abs(ScoreReact(r, INFINITY) - ScoreEnergy(r)));
    worst = std::max(worst, std::abs(ScoreDice(r, mean, 1.0) - ScoreEnergy(r)));
    worst = std::max(worst, std::abs(ScoreReact(r, INFINITY, BaseScore::kMaxLogit) -
                                     ScoreMaxLogit(r)));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Confidence, OdinReducesToMcp) {
  CounterRng rng(5);
  for (int i = 0; i < 10; ++i) {
    const ModelSpec spec = i % 2 ? TinyConv(6, 6, 3) : Mlp(5, {4}, 2);
    const ModelParams params = InitParams(spec, i);
    const Tensor x = RandomTensor(rng, spec.input_shape, 0.0, 1.0);
    const LogitRecord r = LogitRecord::FromTrace(spec, params, Forward(spec, params, x));
    EXPECT_LE(std::abs(ScoreOdin(spec, params, x, {1.0, 0.0}) - ScoreMcp(r)), 1e-12);
    const std::vector<double> eps = {0.0, 0.001, 0.01};
    const std::vector<double> many = OdinScores(spec, params, x, 10.0, eps);
    for (std::size_t e = 0; e < eps.size(); ++e) {
      EXPECT_EQ(many[e], ScoreOdin(spec, params, x, {10.0, eps[e]}));
    }
  }
}

TEST(Confidence, OdinPerturbationRaisesConfidence) {
  CounterRng rng(6);
  const ModelSpec spec = Mlp(6, {5}, 3);
  const ModelParams params = InitParams(spec, 2);
  const Tensor x = RandomTensor(rng, spec.input_shape);
  EXPECT_GT(ScoreOdin(spec, params, x, {1.0, 0.01}), ScoreOdin(spec, params, x, {1.0, 0.0}));
}

TEST(Confidence, McdpWithoutDropoutMatchesSinglePass) {
  CounterRng rng(12);
  for (int i = 0; i < 10; ++i) {
    const ModelSpec spec = TinyConv(6, 6, 2, 0.3);
    const ModelParams params = InitParams(spec, i);
    const Tensor x = RandomTensor(rng, spec.input_shape, 0.0, 1.0);
    const std::vector<Tensor> samples = McDropoutSample(spec, params, x, 0.0, 5, i);
    const LogitRecord r = LogitRecord::FromTrace(spec, params, Forward(spec, params, x));
    EXPECT_LE(std::abs(ScoreMcdp(samples, McdpVariant::kMcp) - ScoreMcp(r)), 1e-12);
    EXPECT_LE(std::abs(ScoreMcdp(samples, McdpVariant::kPredictiveEntropy) -
                       ScoreShannonEntropy(r)),
              1e-12);
    EXPECT_LE(std::abs(ScoreMcdp(samples, McdpVariant::kMutualInformation)), 1e-12);
  }
}

TEST(Confidence, MutualInformationIsNonPositive) {
  CounterRng rng(13);
  for (int i = 0; i < 50; ++i) {
    std::vector<Tensor> samples;
    for (int t = 0; t < 4; ++t) {
      samples.push_back(Tensor::Vector(Softmax(RandomVector(rng, 3, -3.0, 3.0))));
    }
    EXPECT_LE(ScoreMcdp(samples, McdpVariant::kMutualInformation), 1e-15);
    EXPECT_GE(ScoreMcdp(samples, McdpVariant::kPredictiveEntropy), -std::log(3.0) - 1e-12);
  }
  EXPECT_OODGATE_ERROR(ScoreMcdp({}, McdpVariant::kMcp), ErrorCode::kEmptySamples);
}

TEST(Confidence, DeMcpAveragesMembers) {
  const std::vector<Tensor> members = {Tensor::Vector({0.9, 0.1}), Tensor::Vector({0.3, 0.7})};
  EXPECT_NEAR(ScoreDeMcp(members), 0.6, 1e-15);
  const std::vector<Tensor> one = {Tensor::Vector({0.2, 0.8})};
  EXPECT_EQ(ScoreDeMcp(one), 0.8);
}

TEST(Confidence, GradNormMatchesExplicitGradient) {
  CounterRng rng(21);
  for (int i = 0; i < 20; ++i) {
    const LogitRecord r = RandomRecord(rng, 3, 5);
    const std::size_t k = 3, m = 5;
    double l1 = 0.0;
    for (std::size_t y = 0; y < k; ++y) {
      for (std::size_t j = 0; j < m; ++j) {
        l1 += std::abs((r.softmax[y] - 1.0 / k) * r.penultimate_features[j]);
      }
    }
    EXPECT_NEAR(ScoreGradNorm(r), l1, 1e-12);
  }
}

TEST(Confidence, DiceKeepsFloorOfFraction) {
  CounterRng rng(3);
  const Tensor w = RandomTensor(rng, {2, 10});
  const std::vector<double> mean = RandomVector(rng, 10, 0.0, 1.0);
  for (double p : {0.0, 0.1, 0.3, 0.55, 1.0}) {
    const std::vector<std::uint8_t> mask = DiceMask(mean, w, p);
    for (std::size_t y = 0; y < 2; ++y) {
      std::size_t kept = 0;
      for (std::size_t i = 0; i < 10; ++i) kept += mask[y * 10 + i];
      EXPECT_EQ(kept, static_cast<std::size_t>(std::floor(p * 10 + 1e-9)));
    }
  }
  EXPECT_OODGATE_ERROR(DiceMask({}, w, 0.5), ErrorCode::kMissingFitStatistics);
}

TEST(Confidence, RecordValidation) {
  EXPECT_OODGATE_ERROR(LogitRecord::Make(Tensor::Vector({1.0})), ErrorCode::kShapeMismatch);
  EXPECT_OODGATE_ERROR(LogitRecord::Make(Tensor::Vector({1.0, 2.0}), Tensor::Vector({1.0}),
                                         Tensor(Shape{2, 3}), Tensor(Shape{2})),
                       ErrorCode::kShapeMismatch);
}

}  // namespace
}  // namespace oodgate
