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

// A small deterministic feed-forward engine. Image tensors are [H, W, C]
// row-major, i.e. indexed (row, col, channel); vectors are rank 1.

#ifndef OODGATE_MODEL_H_
#define OODGATE_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "oodgate/tensor.h"

namespace oodgate {

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
};

struct Conv2dLayer {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
};

struct ReluLayer {};

struct MaxPoolLayer {
  std::size_t kernel = 2;
  std::size_t stride = 2;
};

struct GlobalAvgPoolLayer {};

struct DropoutLayer {
  double p = 0.0;
};

struct FlattenLayer {};

using LayerSpec = std::variant<DenseLayer, Conv2dLayer, ReluLayer, MaxPoolLayer,
                               GlobalAvgPoolLayer, DropoutLayer, FlattenLayer>;

std::string LayerTypeName(const LayerSpec& layer);
bool HasParams(const LayerSpec& layer);

struct ModelSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  int num_classes = 0;

  // Output shape of every layer; throws ShapeMismatch when adjacent layers
  // disagree or the final output is not a length-K vector.
  std::vector<Shape> OutputShapes() const;
  void Validate() const { OutputShapes(); }
};

// Weights are [out, in] for Dense and [out_ch, kernel, kernel, in_ch] for
// Conv2d. Parameter-free layers hold empty tensors.
struct LayerParams {
  Tensor weight{Shape{0}};
  Tensor bias{Shape{0}};
};

struct ModelParams {
  std::vector<LayerParams> layers;

  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

struct Model {
  ModelSpec spec;
  ModelParams params;
};

// Conv(1->8,3x3,pad1)-ReLU-MaxPool2-Conv(8->16,3x3,pad1)-ReLU-GAP-Dropout-Dense.
ModelSpec TinyConv(std::size_t height, std::size_t width, int num_classes,
                   double dropout_p = 0.3);
// Layer whose output is the first ReLU activation of TinyConv.
inline constexpr std::size_t kTinyConvEarlyLayer = 1;
inline constexpr std::size_t kTinyConvSecondRelu = 4;

// Dense-ReLU stack ending in a Dense(K) layer.
ModelSpec Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
              int num_classes);

// Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)); zero biases.
ModelParams InitParams(const ModelSpec& spec, std::uint64_t seed);

// Throws ShapeMismatch/InvariantViolation for mismatched or non-finite params.
void ValidateParams(const ModelSpec& spec, const ModelParams& params);

enum class ForwardMode { kEval, kMcDropout };

struct ForwardTrace {
  Tensor input;
  // Output of every layer, index-aligned with ModelSpec::layers.
  std::vector<Tensor> outputs;
  Tensor logits;
  Tensor softmax;

  // Backward-pass caches: dropout keep masks (empty when not sampled) and
  // flat argmax indices of max-pool windows.
  std::vector<std::vector<std::uint8_t>> dropout_masks;
  std::vector<std::vector<std::uint32_t>> pool_argmax;
};

ForwardTrace Forward(const ModelSpec& spec, const ModelParams& params,
                     const Tensor& x, ForwardMode mode = ForwardMode::kEval,
                     std::optional<std::uint64_t> seed = std::nullopt);

// Scalar objectives differentiated by InputGradient.
struct Objective {
  enum class Kind { kLogMaxSoftmax, kLogit, kCrossEntropy };
  Kind kind = Kind::kLogMaxSoftmax;
  int index = 0;
  double temperature = 1.0;

  // log max_y softmax(logits / T)[y].
  static Objective LogMaxSoftmax(double temperature = 1.0) {
    return {Kind::kLogMaxSoftmax, 0, temperature};
  }
  static Objective Logit(int k) { return {Kind::kLogit, k, 1.0}; }
  // -log softmax(logits)[target].
  static Objective CrossEntropy(int target) {
    return {Kind::kCrossEntropy, target, 1.0};
  }
};

double EvaluateObjective(const Objective& objective, const Tensor& logits);

// Exact reverse-mode gradient of the objective with respect to x, with
// dropout in eval mode.
Tensor InputGradient(const ModelSpec& spec, const ModelParams& params,
                     const Tensor& x, const Objective& objective);

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  // Starting point; Glorot-uniform from `seed` when absent.
  std::optional<ModelParams> initial;
};

struct TrainResult {
  ModelParams params;
  // Mean cross-entropy over the epoch, accumulated before each update.
  std::vector<double> epoch_losses;
};

// Mini-batch SGD with momentum on mean cross-entropy. Shuffling, dropout
// masks and initialisation all derive from config.seed.
TrainResult Train(const ModelSpec& spec, std::span<const Tensor> inputs,
                  std::span<const int> labels, const TrainConfig& config);

double MeanCrossEntropy(const ModelSpec& spec, const ModelParams& params,
                        std::span<const Tensor> inputs,
                        std::span<const int> labels);

// T softmax vectors with independent dropout masks. Sample t equals
// Forward(x, kMcDropout, DeriveStream(seed, t)). When `p_override` is set it
// replaces every dropout rate, and a model without dropout layers gets one
// inserted before its final layer.
std::vector<Tensor> McDropoutSample(const ModelSpec& spec,
                                    const ModelParams& params, const Tensor& x,
                                    std::optional<double> p_override,
                                    std::size_t num_samples, std::uint64_t seed);

// Eval-mode softmax of every member.
std::vector<Tensor> EnsembleSoftmaxes(std::span<const Model> members,
                                      const Tensor& x);

// Spatial mean of a [J, J, M] map, or a rank-1 output returned as-is.
Tensor ExtractFeatureVector(const ForwardTrace& trace, std::size_t layer_index);

// Input of the final layer (the penultimate representation).
const Tensor& PenultimateFeatures(const ModelSpec& spec,
                                  const ForwardTrace& trace);

// LRP-epsilon relevance of `target_class` over the input. Relevance starts as
// the target logit; biases absorb their share. Dropout acts as identity.
Tensor LrpRelevance(const ModelSpec& spec, const ModelParams& params,
                    const Tensor& x, int target_class, double epsilon = 1e-6);

// model.json plus `<layer_index>.w.npy` / `<layer_index>.b.npy`.
void SaveModel(const Model& model, const std::filesystem::path& dir);
Model LoadModel(const std::filesystem::path& dir);

std::string SpecToJson(const ModelSpec& spec);
ModelSpec SpecFromJson(const std::string& text);

std::vector<double> Softmax(std::span<const double> logits,
                            double temperature = 1.0);
std::size_t Argmax(std::span<const double> values);

}  // namespace oodgate

#endif  // OODGATE_MODEL_H_
