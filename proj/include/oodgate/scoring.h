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

// Builds a ScoreTable for one seed from model outputs, either computed by
// the built-in engine or ingested from external array dumps.

#ifndef OODGATE_SCORING_H_
#define OODGATE_SCORING_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oodgate/confidence.h"
#include "oodgate/manifest.h"
#include "oodgate/model.h"
#include "oodgate/score_table.h"

namespace oodgate {

// The sixteen registered method identifiers, in report order.
const std::vector<std::string>& RegisteredMethods();
bool IsRegisteredMethod(std::string_view method);
// Methods that need the model itself rather than its recorded outputs.
bool NeedsModel(std::string_view method);

struct ScoringOptions {
  std::vector<std::string> methods;
  std::vector<double> odin_temperatures = {1.0, 10.0, 100.0, 1000.0};
  std::vector<double> odin_epsilons = {0.0, 0.0005, 0.001, 0.002, 0.005};
  // Percentiles of the pooled training penultimate activations.
  std::vector<double> react_percentiles = {80.0, 85.0, 90.0, 95.0, 99.0};
  std::vector<double> dice_keep = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t mcdp_samples = 20;
  std::vector<std::size_t> mbm_layers = {kTinyConvEarlyLayer, kTinyConvSecondRelu};
  std::vector<std::size_t> gram_layers = {kTinyConvEarlyLayer, kTinyConvSecondRelu};
  int gram_orders = 5;
  std::uint64_t seed = 0;
};

struct EvalRow {
  std::string sample_id;
  Variant variant = Variant::kOriginal;
  Domain domain = Domain::kId;
  int label = 0;
};

// Everything scoring consumes for one seed. `features` are the early-layer
// feature vectors used by the Mahalanobis and RMS scores.
struct SeedOutputs {
  std::vector<int> train_labels;
  std::vector<LogitRecord> train_records;
  std::vector<Tensor> train_features;

  std::vector<EvalRow> rows;
  std::vector<LogitRecord> records;
  std::vector<Tensor> features;

  // Per row, the softmax of every ensemble member (DE-MCP).
  std::vector<std::vector<Tensor>> ensemble_softmax;

  // Model path only.
  const Model* model = nullptr;
  std::vector<Tensor> train_images;
  std::vector<Tensor> images;
};

struct ScoredSeed {
  ScoreTable table;
  // Selected hyperparameters, e.g. "odin.temperature".
  std::map<std::string, double> chosen;
};

// Starred methods pick the grid point with the best AUROC_OOD over the
// original-variant rows; ties keep the earliest grid point.
ScoredSeed ScoreSeed(const SeedOutputs& outputs, const ScoringOptions& options);

// Runs `model` over the train, id_test and ood_test images and the
// counterfactuals; `images` is keyed by sample id and counterfactual id.
// Ensemble inputs are left empty (see AttachEnsemble).
SeedOutputs ComputeSeedOutputs(const DatasetManifest& manifest,
                               const std::map<std::string, Tensor>& images, const Model& model,
                               std::size_t feature_layer = kTinyConvEarlyLayer);

// External dump layout, one directory per seed:
//   train_logits.npy [N_train, K]   train_features.npy [N_train, M]
//   train_penultimate.npy [N_train, P]
//   logits.npy / features.npy / penultimate.npy for the evaluated rows,
//   last_layer_weight.npy [K, P], last_layer_bias.npy [K]
// Train rows follow manifest order; evaluated rows are the id_test and
// ood_test rows in manifest order followed by the counterfactual of every
// ood_test row.
void WriteDump(const SeedOutputs& outputs, const std::filesystem::path& dir);
SeedOutputs ReadDump(const DatasetManifest& manifest, const std::filesystem::path& dir);

// Fills ensemble_softmax of every seed with the softmaxes of all seeds, which
// must cover the same rows.
void AttachEnsemble(std::span<SeedOutputs> seeds);

// Evaluated rows in dump order.
std::vector<EvalRow> EvalRowsOf(const DatasetManifest& manifest);

}  // namespace oodgate

#endif  // OODGATE_SCORING_H_
