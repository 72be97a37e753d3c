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

// oodgate {synth|train|score|eval|gate|report|all} [--config F] [--seed N] [--out D]
//
// Exit status: 0 ok, 1 invalid config, 2 missing upstream artifact,
// 3 runtime failure. Failures print one line to stderr:
//   oodgate: error exit=<n> code=<ErrorCode> stage=<stage> message=<text>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "oodgate/error.h"
#include "oodgate/pipeline.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalidConfig = 1;
constexpr int kExitMissingArtifact = 2;
constexpr int kExitRuntime = 3;

int ExitCodeFor(oodgate::ErrorCode code) {
  switch (code) {
    case oodgate::ErrorCode::kInvalidConfig:
    case oodgate::ErrorCode::kInvalidSpec:
    case oodgate::ErrorCode::kArtefactOverlapsSignal:
      return kExitInvalidConfig;
    case oodgate::ErrorCode::kMissingArtifact:
      return kExitMissingArtifact;
    default:
      return kExitRuntime;
  }
}

std::string OneLine(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

int Fail(int exit_code, std::string_view code, std::string_view stage, const std::string& msg) {
  std::cerr << "oodgate: error exit=" << exit_code << " code=" << code << " stage=" << stage
            << " message=" << OneLine(msg) << "\n";
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Artefact OOD detection benchmark runner"};
  std::string stage_name;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("stage", stage_name, "synth, train, score, eval, gate, report or all")
      ->required();
  app.add_option("--config", config_path, "run configuration (JSON)");
  app.add_option("--seed", seed, "run a single seed instead of the configured list");
  app.add_option("--out", out_dir, "output root directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail(kExitInvalidConfig, "InvalidArguments", "cli", e.what());
  }

  const std::optional<oodgate::Stage> stage = oodgate::ParseStage(stage_name);
  if (!stage) return Fail(kExitInvalidConfig, "InvalidArguments", "cli", "unknown stage " + stage_name);

  try {
    oodgate::RunConfig config = oodgate::DefaultRunConfig();
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in.good()) {
        return Fail(kExitInvalidConfig, "InvalidConfig", stage_name,
                    "cannot read config " + config_path);
      }
      const std::string text((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
      config = oodgate::ParseRunConfig(text);
      if (config.external && config.external->is_relative()) {
        config.external = std::filesystem::path(config_path).parent_path() / *config.external;
      }
    }
    if (seed) config.seeds = {*seed};
    if (!out_dir.empty()) config.output_dir = out_dir;

    oodgate::Pipeline pipeline(std::move(config));
    pipeline.Run(*stage);
    std::cout << "stage=" << stage_name << " run_dir=" << pipeline.run_dir().string() << "\n";
    return kExitOk;
  } catch (const oodgate::Error& e) {
    const std::string what = e.what();
    const std::string_view name = oodgate::ErrorCodeName(e.code());
    // Error::what() is "<code>: <message>".
    const std::string msg =
        what.rfind(std::string(name) + ": ", 0) == 0 ? what.substr(name.size() + 2) : what;
    return Fail(ExitCodeFor(e.code()), name, stage_name, msg);
  } catch (const std::exception& e) {
    return Fail(kExitRuntime, "RuntimeFailure", stage_name, e.what());
  }
}
