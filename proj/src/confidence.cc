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

#include "oodgate/confidence.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oodgate/error.h"

namespace oodgate {
namespace {

double BaseOf(std::span<const double> logits, BaseScore base) {
  if (base == BaseScore::kEnergy) return EnergyOfLogits(logits);
  return *std::max_element(logits.begin(), logits.end());
}

void RequireLastLayer(const LogitRecord& r) {
  const std::size_t k = r.logits.size();
  const std::size_t m = r.penultimate_features.size();
  Require(m > 0 && r.last_layer_weights.shape() == Shape{k, m} &&
              r.last_layer_bias.shape() == Shape{k},
          ErrorCode::kShapeMismatch,
          "score needs penultimate features and final-layer parameters");
}

// logits' = W' f + b for an explicit feature vector and optional keep mask.
std::vector<double> Relogit(const LogitRecord& r, std::span<const double> features,
                            std::span<const std::uint8_t> mask) {
  const std::size_t k = r.logits.size();
  const std::size_t m = features.size();
  std::vector<double> out(k);
  for (std::size_t y = 0; y < k; ++y) {
    double acc = r.last_layer_bias[y];
    for (std::size_t i = 0; i < m; ++i) {
      if (!mask.empty() && mask[y * m + i] == 0) continue;
      acc += r.last_layer_weights[y * m + i] * features[i];
    }
    out[y] = acc;
  }
  return out;
}

}  // namespace

LogitRecord LogitRecord::Make(Tensor logits, Tensor penultimate_features,
                              Tensor last_layer_weights, Tensor last_layer_bias) {
  Require(logits.rank() == 1 && logits.size() >= 2, ErrorCode::kShapeMismatch,
          "logits must be a vector with K >= 2");
  LogitRecord r;
  r.logits = logits.WithDType(DType::kFloat64);
  r.softmax = Tensor::Vector(Softmax(r.logits.values()));
  r.penultimate_features = penultimate_features.WithDType(DType::kFloat64);
  r.last_layer_weights = last_layer_weights.WithDType(DType::kFloat64);
  r.last_layer_bias = last_layer_bias.WithDType(DType::kFloat64);
  if (r.last_layer_weights.size() > 0) RequireLastLayer(r);
  return r;
}

LogitRecord LogitRecord::FromTrace(const ModelSpec& spec, const ModelParams& params,
                                   const ForwardTrace& trace) {
  Require(std::holds_alternative<DenseLayer>(spec.layers.back()),
          ErrorCode::kShapeMismatch, "final layer must be Dense");
  const LayerParams& last = params.layers.back();
  return Make(trace.logits, PenultimateFeatures(spec, trace), last.weight, last.bias);
}

double ScoreMcp(const LogitRecord& r) {
  const auto s = r.softmax.values();
  return *std::max_element(s.begin(), s.end());
}

double Entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double ScoreShannonEntropy(const LogitRecord& r) { return -Entropy(r.softmax.values()); }

double ScoreMaxLogit(const LogitRecord& r) {
  const auto l = r.logits.values();
  return *std::max_element(l.begin(), l.end());
}

double EnergyOfLogits(std::span<const double> logits, double temperature) {
  Require(temperature > 0.0, ErrorCode::kInvariantViolation, "temperature must be positive");
  double m = logits[0] / temperature;
  for (double v : logits) m = std::max(m, v / temperature);
  double s = 0.0;
  for (double v : logits) s += std::exp(v / temperature - m);
  return temperature * (m + std::log(s));
}

double ScoreEnergy(const LogitRecord& r, double temperature) {
  return EnergyOfLogits(r.logits.values(), temperature);
}

double ScoreMcdp(std::span<const Tensor> samples, McdpVariant variant) {
  Require(!samples.empty(), ErrorCode::kEmptySamples, "no dropout samples");
  const std::size_t k = samples[0].size();
  std::vector<double> mean(k, 0.0);
  double mean_entropy = 0.0;
  for (const Tensor& s : samples) {
    Require(s.size() == k, ErrorCode::kShapeMismatch, "samples differ in class count");
    for (std::size_t j = 0; j < k; ++j) mean[j] += s[j];
    mean_entropy += Entropy(s.values());
  }
  const double t = static_cast<double>(samples.size());
  for (double& v : mean) v /= t;
  mean_entropy /= t;
  switch (variant) {
    case McdpVariant::kMcp:
      return *std::max_element(mean.begin(), mean.end());
    case McdpVariant::kPredictiveEntropy:
      return -Entropy(mean);
    case McdpVariant::kMutualInformation:
      return -(Entropy(mean) - mean_entropy);
  }
  return 0.0;
}

double ScoreDeMcp(std::span<const Tensor> member_softmaxes) {
  return ScoreMcdp(member_softmaxes, McdpVariant::kMcp);
}

double ScoreGradNorm(const LogitRecord& r) {
  Require(r.penultimate_features.size() > 0, ErrorCode::kShapeMismatch,
          "GradNorm needs penultimate features");
  const double u = 1.0 / static_cast<double>(r.softmax.size());
  double output_l1 = 0.0;
  for (double p : r.softmax.values()) output_l1 += std::abs(p - u);
  double feature_l1 = 0.0;
  for (double f : r.penultimate_features.values()) feature_l1 += std::abs(f);
  return output_l1 * feature_l1;
}

std::vector<double> OdinScores(const ModelSpec& spec, const ModelParams& params,
                               const Tensor& x, double temperature,
                               std::span<const double> epsilons) {
  Require(temperature > 0.0, ErrorCode::kInvariantViolation, "temperature must be positive");
  const Tensor grad = InputGradient(spec, params, x, Objective::LogMaxSoftmax(temperature));
  std::vector<double> scores;
  scores.reserve(epsilons.size());
  const Tensor base = x.WithDType(DType::kFloat64);
  for (double eps : epsilons) {
    Require(eps >= 0.0, ErrorCode::kInvariantViolation, "epsilon must be >= 0");
    Tensor perturbed = base;
    if (eps != 0.0) {
      auto v = perturbed.mutable_values();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double g = grad[i];
        // x - eps * sign(-g)
        v[i] += g > 0.0 ? eps : (g < 0.0 ? -eps : 0.0);
      }
    }
    const ForwardTrace t = Forward(spec, params, perturbed);
    const std::vector<double> s = Softmax(t.logits.values(), temperature);
    scores.push_back(*std::max_element(s.begin(), s.end()));
  }
  return scores;
}

double ScoreOdin(const ModelSpec& spec, const ModelParams& params, const Tensor& x,
                 const TemperatureConfig& cfg) {
  const double eps[] = {cfg.epsilon};
  return OdinScores(spec, params, x, cfg.temperature, eps)[0];
}

double ScoreReact(const LogitRecord& r, double clamp, BaseScore base) {
  RequireLastLayer(r);
  std::vector<double> clamped(r.penultimate_features.values().begin(),
                              r.penultimate_features.values().end());
  for (double& f : clamped) f = std::min(f, clamp);
  return BaseOf(Relogit(r, clamped, {}), base);
}

std::vector<std::uint8_t> DiceMask(std::span<const double> train_mean_features,
                                   const Tensor& last_layer_weights, double keep_fraction) {
  Require(!train_mean_features.empty(), ErrorCode::kMissingFitStatistics,
          "DICE needs the training mean of the penultimate features");
  Require(last_layer_weights.rank() == 2 &&
              last_layer_weights.shape()[1] == train_mean_features.size(),
          ErrorCode::kMissingFitStatistics,
          "training mean features do not match the final layer width");
  Require(keep_fraction >= 0.0 && keep_fraction <= 1.0, ErrorCode::kInvariantViolation,
          "keep fraction must lie in [0, 1]");
  const std::size_t k = last_layer_weights.shape()[0];
  const std::size_t m = last_layer_weights.shape()[1];
  // The small slack keeps e.g. 0.3 * 10 from flooring to 2.
  const auto keep = std::min(
      m, static_cast<std::size_t>(std::floor(keep_fraction * static_cast<double>(m) + 1e-9)));
  std::vector<std::uint8_t> mask(k * m, 0);
  std::vector<std::size_t> idx(m);
  std::vector<double> contrib(m);
  for (std::size_t y = 0; y < k; ++y) {
    for (std::size_t i = 0; i < m; ++i) {
      contrib[i] = train_mean_features[i] * last_layer_weights[y * m + i];
    }
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return contrib[a] > contrib[b]; });
    for (std::size_t j = 0; j < keep; ++j) mask[y * m + idx[j]] = 1;
  }
  return mask;
}

double ScoreDiceMasked(const LogitRecord& r, std::span<const std::uint8_t> mask,
                       BaseScore base) {
  RequireLastLayer(r);
  Require(mask.size() == r.last_layer_weights.size(), ErrorCode::kShapeMismatch,
          "DICE mask does not match the final layer");
  return BaseOf(Relogit(r, r.penultimate_features.values(), mask), base);
}

double ScoreDice(const LogitRecord& r, std::span<const double> train_mean_features,
                 double keep_fraction, BaseScore base) {
  RequireLastLayer(r);
  const std::vector<std::uint8_t> mask =
      DiceMask(train_mean_features, r.last_layer_weights, keep_fraction);
  return ScoreDiceMasked(r, mask, base);
}

}  // namespace oodgate
