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

// Output-layer (confidence-based) OOD scores. Every score follows the same
// convention: higher means more in-distribution.

#ifndef OODGATE_CONFIDENCE_H_
#define OODGATE_CONFIDENCE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "oodgate/model.h"
#include "oodgate/tensor.h"

namespace oodgate {

// Everything the output-layer scores need from one forward pass.
struct LogitRecord {
  Tensor logits;                // [K]
  Tensor softmax;               // [K], derived from logits
  Tensor penultimate_features;  // [M]
  Tensor last_layer_weights;    // [K, M]
  Tensor last_layer_bias;       // [K]

  // Derives the softmax and checks K >= 2 and the [K, M] shapes. The final
  // layer parameters may be omitted (empty tensors) for scores that do not
  // use them.
  static LogitRecord Make(Tensor logits, Tensor penultimate_features = Tensor(Shape{0}),
                          Tensor last_layer_weights = Tensor(Shape{0}),
                          Tensor last_layer_bias = Tensor(Shape{0}));

  // From an eval-mode forward trace; the model must end in a Dense layer.
  static LogitRecord FromTrace(const ModelSpec& spec, const ModelParams& params,
                               const ForwardTrace& trace);
};

struct TemperatureConfig {
  double temperature = 1.0;
  double epsilon = 0.0;
};

enum class McdpVariant { kMcp, kPredictiveEntropy, kMutualInformation };
enum class BaseScore { kEnergy, kMaxLogit };

double ScoreMcp(const LogitRecord& r);
// Negated Shannon entropy of the softmax.
double ScoreShannonEntropy(const LogitRecord& r);
double ScoreMaxLogit(const LogitRecord& r);
// T * logsumexp(logits / T).
double ScoreEnergy(const LogitRecord& r, double temperature = 1.0);
double EnergyOfLogits(std::span<const double> logits, double temperature = 1.0);

// Shannon entropy -sum p ln p with 0 ln 0 = 0.
double Entropy(std::span<const double> p);

// mcp: max of the mean softmax; pe: -H(mean); mi: -(H(mean) - mean_t H(p_t)).
double ScoreMcdp(std::span<const Tensor> samples, McdpVariant variant);

// Max of the member-averaged softmax.
double ScoreDeMcp(std::span<const Tensor> member_softmaxes);

// L1 norm of d CE(softmax, uniform) / dW for the final layer, which equals
// ||softmax - 1/K||_1 * ||features||_1.
double ScoreGradNorm(const LogitRecord& r);

// Temperature-scaled MCP after one signed-gradient input step that raises
// log max softmax(f(x)/T).
double ScoreOdin(const ModelSpec& spec, const ModelParams& params, const Tensor& x,
                 const TemperatureConfig& cfg);
// One ODIN score per epsilon, sharing the input gradient at temperature T.
std::vector<double> OdinScores(const ModelSpec& spec, const ModelParams& params,
                               const Tensor& x, double temperature,
                               std::span<const double> epsilons);

// Clamps penultimate features at `clamp` before re-evaluating the last layer.
double ScoreReact(const LogitRecord& r, double clamp, BaseScore base = BaseScore::kEnergy);

// Keep mask ([K, M], row-major) retaining the floor(p * M) largest
// contributions mean_feature[i] * W[y, i] of every row; ties keep the lower
// index.
std::vector<std::uint8_t> DiceMask(std::span<const double> train_mean_features,
                                   const Tensor& last_layer_weights, double keep_fraction);

// Energy on logits recomputed with the DICE-sparsified final layer. Throws
// MissingFitStatistics when the training mean features are absent.
double ScoreDice(const LogitRecord& r, std::span<const double> train_mean_features,
                 double keep_fraction, BaseScore base = BaseScore::kEnergy);
// Same, with a precomputed mask.
double ScoreDiceMasked(const LogitRecord& r, std::span<const std::uint8_t> mask,
                       BaseScore base = BaseScore::kEnergy);

}  // namespace oodgate

#endif  // OODGATE_CONFIDENCE_H_
