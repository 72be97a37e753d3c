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

// End-to-end run orchestration: synth -> train -> score -> eval -> gate ->
// report. Every output lives under <output_dir>/<config hash>/.

#ifndef OODGATE_PIPELINE_H_
#define OODGATE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oodgate/eval.h"
#include "oodgate/scoring.h"
#include "oodgate/synth.h"

namespace oodgate {

struct TrainSettings {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 10;
  std::size_t batch_size = 16;
  double dropout = 0.3;
};

struct RunConfig {
  // Exactly one source.
  std::optional<SyntheticSpec> synthetic;
  // Directory with manifest.csv and one seed_<s>/ dump per seed.
  std::optional<std::filesystem::path> external;

  TrainSettings train;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  // methods, grids, layers; `seed` is set per run.
  ScoringOptions scoring;
  std::size_t feature_layer = kTinyConvEarlyLayer;
  std::vector<GatePanel> gates = DefaultGatePanels();
  double percentile = 75.0;
  // Also write array dumps of every seed's model outputs under scores/.
  bool export_dumps = false;
  std::filesystem::path output_dir = "runs";

  // Throws InvalidConfig.
  void Validate() const;
};

// Synthetic default benchmark with all sixteen methods.
RunConfig DefaultRunConfig();

// Missing keys keep their defaults; unknown keys are rejected. The result is
// validated.
RunConfig ParseRunConfig(std::string_view json_text);
// Every field except output_dir, in a fixed key order.
std::string CanonicalConfigJson(const RunConfig& config);
// 16 hex digits of the canonical JSON hash.
std::string ConfigHash(const RunConfig& config);

enum class Stage { kSynth, kTrain, kScore, kEval, kGate, kReport, kAll };
std::string_view StageName(Stage stage);
std::optional<Stage> ParseStage(std::string_view text);

class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  const RunConfig& config() const { return config_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }

  std::filesystem::path dataset_dir() const;
  std::filesystem::path model_dir(std::uint64_t seed) const;
  std::filesystem::path score_path(std::uint64_t seed) const;
  std::filesystem::path dump_dir(std::uint64_t seed) const;
  std::filesystem::path eval_path() const;
  std::filesystem::path gate_path() const;
  std::filesystem::path report_path() const;
  std::filesystem::path table_path() const;

  // Each stage throws MissingArtifact when an upstream output is absent.
  void Run(Stage stage);
  void Synth();
  void Train();
  void Score();
  void Eval();
  void Gate();
  void Report();

 private:
  std::vector<ScoreTable> LoadScoreTables() const;
  std::vector<std::string> ReportMethods() const;

  RunConfig config_;
  std::filesystem::path run_dir_;
};

}  // namespace oodgate

#endif  // OODGATE_PIPELINE_H_
