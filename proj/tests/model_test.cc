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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "oodgate/model.h"
#include "oracles.h"
#include "test_util.h"

namespace oodgate {
namespace {

using testing::RandomTensor;
using testing::TempDir;

ModelParams WithRandomBiases(const ModelSpec& spec, ModelParams params, CounterRng& rng) {
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    for (double& b : params.layers[l].bias.mutable_values()) b = rng.Uniform(-0.1, 0.1);
  }
  return params;
}

TEST(Model, TinyConvShapes) {
  const ModelSpec spec = TinyConv(28, 28, 3);
  const std::vector<Shape> shapes = spec.OutputShapes();
  ASSERT_EQ(shapes.size(), 8u);
  EXPECT_EQ(shapes[kTinyConvEarlyLayer], (Shape{28, 28, 8}));
  EXPECT_EQ(shapes[2], (Shape{14, 14, 8}));
  EXPECT_EQ(shapes[kTinyConvSecondRelu], (Shape{14, 14, 16}));
  EXPECT_EQ(shapes.back(), (Shape{3}));
}

TEST(Model, RejectsInconsistentSpecs) {
  ModelSpec spec = Mlp(4, {3}, 2);
  spec.layers[2] = DenseLayer{4, 2};
  EXPECT_OODGATE_ERROR(spec.Validate(), ErrorCode::kShapeMismatch);
  const ModelSpec good = Mlp(4, {3}, 2);
  ModelParams params = InitParams(good, 1);
  params.layers[0].weight = Tensor(Shape{3, 5});
  EXPECT_OODGATE_ERROR(ValidateParams(good, params), ErrorCode::kShapeMismatch);
  EXPECT_OODGATE_ERROR(Forward(good, InitParams(good, 1), Tensor(Shape{5})),
                       ErrorCode::kShapeMismatch);
}

TEST(Model, InitIsGlorotUniformWithZeroBias) {
  const ModelSpec spec = Mlp(10, {6}, 2);
  const ModelParams p = InitParams(spec, 3);
  const double a = std::sqrt(6.0 / 16.0);
  for (double w : p.layers[0].weight.values()) EXPECT_LE(std::abs(w), a);
  for (double b : p.layers[0].bias.values()) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(InitParams(spec, 3), p);
  EXPECT_FALSE(InitParams(spec, 4) == p);
}

TEST(Model, SoftmaxAndArgmax) {
  const std::vector<double> p = Softmax(std::vector<double>{1.0, 2.0, 3.0});
  EXPECT_NEAR(p[2], 0.6652409557748218, 1e-15);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
  const std::vector<double> big = Softmax(std::vector<double>{1000.0, 0.0});
  EXPECT_EQ(big[0], 1.0);
  EXPECT_EQ(Argmax(std::vector<double>{0.2, 0.7, 0.7}), 1u);
}

TEST(Model, InputGradientMatchesFiniteDifferences) {
  CounterRng rng(2024);
  const std::vector<Objective> objectives = {Objective::LogMaxSoftmax(),
                                             Objective::LogMaxSoftmax(10.0),
                                             Objective::Logit(1), Objective::CrossEntropy(0)};
  for (int trial = 0; trial < 24; ++trial) {
    const bool conv = trial % 2 == 0;
    const ModelSpec spec = conv ? TinyConv(8, 8, 2 + trial % 3) : Mlp(12, {7, 5}, 3);
    const ModelParams params = WithRandomBiases(spec, InitParams(spec, trial), rng);
    const Tensor x = RandomTensor(rng, spec.input_shape, 0.0, 1.0);
    const Objective& obj = objectives[static_cast<std::size_t>(trial) % objectives.size()];
    const Tensor g = InputGradient(spec, params, x, obj);
    EXPECT_LT(oracles::MaxRelativeError(g, oracles::NumericGradient(spec, params, x, obj)), 1e-4)
        << "trial " << trial;
  }
}

TEST(Model, DropoutIsIdentityInEvalMode) {
  const ModelSpec spec = TinyConv(8, 8, 2, 0.5);
  const ModelParams params = InitParams(spec, 1);
  CounterRng rng(1);
  const Tensor x = RandomTensor(rng, spec.input_shape, 0.0, 1.0);
  const ForwardTrace t = Forward(spec, params, x);
  EXPECT_EQ(t.outputs[6], t.outputs[5]);
}

TEST(Model, McDropoutSamplesAreSeeded) {
  const ModelSpec spec = TinyConv(8, 8, 2, 0.3);
  const ModelParams params = InitParams(spec, 5);
  CounterRng rng(9);
  const Tensor x = RandomTensor(rng, spec.input_shape, 0.0, 1.0);
  const std::vector<Tensor> s = McDropoutSample(spec, params, x, std::nullopt, 4, 77);
  ASSERT_EQ(s.size(), 4u);
  for (std::size_t t = 0; t < s.size(); ++t) {
    const Tensor direct =
        Forward(spec, params, x, ForwardMode::kMcDropout, DeriveStream(77, t)).softmax;
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(s[t][k], direct[k], 1e-15);
  }
  EXPECT_FALSE(s[0] == s[1]);

  const Tensor eval = Forward(spec, params, x).softmax;
  for (const Tensor& p : McDropoutSample(spec, params, x, 0.0, 3, 1)) {
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(p[k], eval[k], 1e-15);
  }
  const ModelSpec mlp = Mlp(4, {3}, 2);
  EXPECT_OODGATE_ERROR(
      McDropoutSample(mlp, InitParams(mlp, 1), Tensor(Shape{4}), std::nullopt, 2, 0),
      ErrorCode::kInvariantViolation);
  EXPECT_EQ(McDropoutSample(mlp, InitParams(mlp, 1), Tensor(Shape{4}), 0.5, 2, 0).size(), 2u);
}

TEST(Model, FeatureVectorIsSpatialMean) {
  const ModelSpec spec = TinyConv(6, 6, 2);
  const ModelParams params = InitParams(spec, 2);
  CounterRng rng(4);
  const ForwardTrace t = Forward(spec, params, RandomTensor(rng, spec.input_shape, 0.0, 1.0));
  const Tensor z = ExtractFeatureVector(t, kTinyConvEarlyLayer);
  const Tensor& h = t.outputs[kTinyConvEarlyLayer];
  ASSERT_EQ(z.shape(), (Shape{8}));
  for (std::size_t c = 0; c < 8; ++c) {
    double s = 0.0;
    for (std::size_t p = 0; p < 36; ++p) s += h[p * 8 + c];
    EXPECT_NEAR(z[c], s / 36.0, 1e-15);
  }
  EXPECT_OODGATE_ERROR(ExtractFeatureVector(t, 99), ErrorCode::kNotAFeatureLayer);
  EXPECT_EQ(PenultimateFeatures(spec, t).shape(), (Shape{16}));
}

TEST(Model, LrpConservesTargetLogit) {
  CounterRng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const ModelSpec spec = trial % 2 ? Mlp(10, {6, 4}, 3) : TinyConv(8, 8, 2);
    const ModelParams params = InitParams(spec, trial);
    const Tensor x = RandomTensor(rng, spec.input_shape, 0.0, 1.0);
    const Tensor r = LrpRelevance(spec, params, x, 1, 0.0);
    const double total = std::accumulate(r.values().begin(), r.values().end(), 0.0);
    const double logit = Forward(spec, params, x).logits[1];
    EXPECT_NEAR(total, logit, 1e-9 * std::max(1.0, std::abs(logit)));
    EXPECT_EQ(r.shape(), spec.input_shape);
  }
  const ModelSpec spec = Mlp(3, {2}, 2);
  EXPECT_OODGATE_ERROR(LrpRelevance(spec, InitParams(spec, 0), Tensor(Shape{3}), 2),
                       ErrorCode::kShapeMismatch);
}

// Two well separated Gaussian clouds.
void ToyData(std::vector<Tensor>& xs, std::vector<int>& ys, std::size_t n) {
  CounterRng rng(31);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    std::vector<double> v(4);
    for (double& e : v) e = rng.Normal() * 0.3 + (y ? 1.0 : -1.0);
    xs.emplace_back(Shape{4}, std::move(v));
    ys.push_back(y);
  }
}

TEST(Model, TrainingIsDeterministicAndLearns) {
  std::vector<Tensor> xs;
  std::vector<int> ys;
  ToyData(xs, ys, 64);
  const ModelSpec spec = Mlp(4, {8}, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 3;
  const TrainResult a = Train(spec, xs, ys, cfg);
  const TrainResult b = Train(spec, xs, ys, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  EXPECT_LT(a.epoch_losses.back(), a.epoch_losses.front());
  EXPECT_LT(MeanCrossEntropy(spec, a.params, xs, ys), 0.1);
  cfg.seed = 4;
  EXPECT_FALSE(Train(spec, xs, ys, cfg).params == a.params);
}

TEST(Model, TrainingDivergenceIsReported) {
  std::vector<Tensor> xs;
  std::vector<int> ys;
  ToyData(xs, ys, 32);
  for (Tensor& x : xs) {
    for (double& v : x.mutable_values()) v *= 1e150;
  }
  const ModelSpec spec = Mlp(4, {8}, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e10;
  try {
    Train(spec, xs, ys, cfg);
    ADD_FAILURE() << "expected a divergence error";
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::kDivergedLoss ||
                e.code() == ErrorCode::kNonFiniteActivation)
        << e.what();
  }
}

TEST(Model, SaveLoadRoundTrip) {
  TempDir dir("model");
  Model m{TinyConv(10, 10, 3, 0.25), {}};
  m.params = InitParams(m.spec, 6);
  SaveModel(m, dir.path());
  const Model back = LoadModel(dir.path());
  EXPECT_EQ(back.params, m.params);
  EXPECT_EQ(SpecToJson(back.spec), SpecToJson(m.spec));
  EXPECT_EQ(SpecToJson(SpecFromJson(SpecToJson(m.spec))), SpecToJson(m.spec));
  EXPECT_OODGATE_ERROR(LoadModel(dir.path() / "missing"), ErrorCode::kIoFailure);
}

TEST(Model, EnsembleReturnsEveryMember) {
  const ModelSpec spec = Mlp(3, {4}, 2);
  std::vector<Model> members;
  for (int s = 0; s < 3; ++s) members.push_back({spec, InitParams(spec, s)});
  const Tensor x(Shape{3}, {0.1, 0.2, 0.3});
  const std::vector<Tensor> out = EnsembleSoftmaxes(members, x);
  ASSERT_EQ(out.size(), 3u);
  for (int s = 0; s < 3; ++s) EXPECT_EQ(out[s], Forward(spec, members[s].params, x).softmax);
}

}  // namespace
}  // namespace oodgate
