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

#include "oodgate/pipeline.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"
#include "oodgate/error.h"
#include "oodgate/npy.h"
#include "oodgate/rng.h"

namespace oodgate {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

void WriteText(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorCode::kIoFailure, "cannot write " + path.string());
  out << text;
}

void RequireArtifact(const fs::path& path, std::string_view what) {
  Require(fs::exists(path), ErrorCode::kMissingArtifact,
          std::string(what) + " not found at " + path.string());
}

void CheckKeys(const Json& j, std::initializer_list<std::string_view> allowed,
               std::string_view where) {
  Require(j.is_object(), ErrorCode::kInvalidConfig, std::string(where) + " must be an object");
  for (const auto& item : j.items()) {
    const bool known = std::find(allowed.begin(), allowed.end(), item.key()) != allowed.end();
    Require(known, ErrorCode::kInvalidConfig,
            "unknown key '" + item.key() + "' in " + std::string(where));
  }
}

std::string SeedDirName(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::map<std::string, Tensor> LoadImages(const DatasetManifest& manifest, const fs::path& dir) {
  std::map<std::string, Tensor> images;
  for (const SampleRecord& r : manifest.records) {
    images.emplace(r.sample_id, ReadArrayFile(dir / (r.sample_id + ".npy")));
    if (r.counterfactual_id) {
      images.emplace(*r.counterfactual_id, ReadArrayFile(dir / (*r.counterfactual_id + ".npy")));
    }
  }
  return images;
}

}  // namespace

void RunConfig::Validate() const {
  const auto bad = [](bool cond, const std::string& msg) {
    Require(!cond, ErrorCode::kInvalidConfig, msg);
  };
  bad(synthetic.has_value() == external.has_value(),
      "exactly one dataset source (synthetic or external) is required");
  bad(seeds.empty(), "seed list is empty");
  bad(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size(),
      "seeds must be distinct");
  bad(scoring.methods.empty(), "method list is empty");
  std::set<std::string> methods;
  for (const std::string& m : scoring.methods) {
    bad(!IsRegisteredMethod(m), "unknown method '" + m + "'");
    bad(!methods.insert(m).second, "method '" + m + "' listed twice");
    bad(external.has_value() && NeedsModel(m),
        "method '" + m + "' needs the built-in model and cannot run on external dumps");
  }
  bad(!(percentile >= 0.0 && percentile <= 100.0), "gate percentile must lie in [0, 100]");
  std::set<std::string> panel_names;
  for (const GatePanel& p : gates) {
    bad(p.name.empty() || !panel_names.insert(p.name).second, "gate names must be unique");
    for (const std::string& m : p.methods) {
      bad(!methods.count(m), "gate '" + p.name + "' uses unscored method '" + m + "'");
    }
  }
  bad(!(train.learning_rate > 0.0) || train.epochs <= 0 || train.batch_size == 0,
      "training needs a positive learning rate, epoch count and batch size");
  bad(!(train.momentum >= 0.0 && train.momentum < 1.0), "momentum must lie in [0, 1)");
  bad(!(train.dropout >= 0.0 && train.dropout < 1.0), "dropout must lie in [0, 1)");
  bad(scoring.mcdp_samples == 0, "mcdp_samples must be positive");
  bad(scoring.gram_orders < 1, "gram_orders must be >= 1");
  bad(scoring.odin_temperatures.empty() || scoring.odin_epsilons.empty() ||
          scoring.react_percentiles.empty() || scoring.dice_keep.empty(),
      "hyperparameter grids must be non-empty");
  for (double t : scoring.odin_temperatures) bad(!(t > 0.0), "ODIN temperatures must be > 0");
  for (double e : scoring.odin_epsilons) bad(!(e >= 0.0), "ODIN epsilons must be >= 0");
  for (double q : scoring.react_percentiles) {
    bad(!(q >= 0.0 && q <= 100.0), "ReAct percentiles must lie in [0, 100]");
  }
  for (double p : scoring.dice_keep) bad(!(p >= 0.0 && p <= 1.0), "DICE keep must lie in [0, 1]");
  bad(scoring.mbm_layers.empty() || scoring.gram_layers.empty(), "layer lists must be non-empty");
  if (synthetic) synthetic->Validate();
}

RunConfig DefaultRunConfig() {
  RunConfig c;
  c.synthetic = SyntheticSpec{};
  c.scoring.methods = RegisteredMethods();
  return c;
}

RunConfig ParseRunConfig(std::string_view text) {
  RunConfig c = DefaultRunConfig();
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    CheckKeys(j,
              {"dataset", "train", "seeds", "methods", "gates", "grids", "mcdp_samples", "layers",
               "export_dumps", "output_dir"},
              "config");
    if (j.contains("dataset")) {
      const Json& d = j["dataset"];
      CheckKeys(d, {"synthetic", "external"}, "dataset");
      if (d.contains("external")) {
        c.synthetic.reset();
        c.external = fs::path(d["external"].get<std::string>());
      }
      if (d.contains("synthetic")) {
        try {
          c.synthetic = SyntheticSpecFromJson(d["synthetic"].dump());
        } catch (const Error& e) {
          throw Error(ErrorCode::kInvalidConfig, e.what());
        }
      }
    }
    if (j.contains("train")) {
      const Json& t = j["train"];
      CheckKeys(t, {"learning_rate", "momentum", "epochs", "batch_size", "dropout"}, "train");
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.momentum = t.value("momentum", c.train.momentum);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.dropout = t.value("dropout", c.train.dropout);
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("methods")) c.scoring.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("gates")) {
      const Json& g = j["gates"];
      CheckKeys(g, {"percentile", "panels"}, "gates");
      c.percentile = g.value("percentile", c.percentile);
      if (g.contains("panels")) {
        c.gates.clear();
        for (const Json& p : g["panels"]) {
          CheckKeys(p, {"name", "methods"}, "gate panel");
          c.gates.push_back({p.at("name").get<std::string>(),
                             p.value("methods", std::vector<std::string>{})});
        }
      }
    }
    if (j.contains("grids")) {
      const Json& g = j["grids"];
      CheckKeys(g, {"odin_temperature", "odin_epsilon", "react_percentile", "dice_keep"}, "grids");
      auto& s = c.scoring;
      s.odin_temperatures = g.value("odin_temperature", s.odin_temperatures);
      s.odin_epsilons = g.value("odin_epsilon", s.odin_epsilons);
      s.react_percentiles = g.value("react_percentile", s.react_percentiles);
      s.dice_keep = g.value("dice_keep", s.dice_keep);
    }
    c.scoring.mcdp_samples = j.value("mcdp_samples", c.scoring.mcdp_samples);
    if (j.contains("layers")) {
      const Json& l = j["layers"];
      CheckKeys(l, {"feature", "mbm", "gram", "gram_orders"}, "layers");
      c.feature_layer = l.value("feature", c.feature_layer);
      c.scoring.mbm_layers = l.value("mbm", c.scoring.mbm_layers);
      c.scoring.gram_layers = l.value("gram", c.scoring.gram_layers);
      c.scoring.gram_orders = l.value("gram_orders", c.scoring.gram_orders);
    }
    c.export_dumps = j.value("export_dumps", c.export_dumps);
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config: ") + e.what());
  }
  c.Validate();
  return c;
}

std::string CanonicalConfigJson(const RunConfig& c) {
  Json j;
  Json d;
  if (c.synthetic) d["synthetic"] = Json::parse(SyntheticSpecToJson(*c.synthetic));
  if (c.external) d["external"] = c.external->generic_string();
  j["dataset"] = std::move(d);
  Json t;
  t["learning_rate"] = c.train.learning_rate;
  t["momentum"] = c.train.momentum;
  t["epochs"] = c.train.epochs;
  t["batch_size"] = c.train.batch_size;
  t["dropout"] = c.train.dropout;
  j["train"] = std::move(t);
  j["seeds"] = c.seeds;
  j["methods"] = c.scoring.methods;
  Json g;
  g["percentile"] = c.percentile;
  g["panels"] = Json::array();
  for (const GatePanel& p : c.gates) g["panels"].push_back({{"name", p.name}, {"methods", p.methods}});
  j["gates"] = std::move(g);
  Json grids;
  grids["odin_temperature"] = c.scoring.odin_temperatures;
  grids["odin_epsilon"] = c.scoring.odin_epsilons;
  grids["react_percentile"] = c.scoring.react_percentiles;
  grids["dice_keep"] = c.scoring.dice_keep;
  j["grids"] = std::move(grids);
  j["mcdp_samples"] = c.scoring.mcdp_samples;
  Json l;
  l["feature"] = c.feature_layer;
  l["mbm"] = c.scoring.mbm_layers;
  l["gram"] = c.scoring.gram_layers;
  l["gram_orders"] = c.scoring.gram_orders;
  j["layers"] = std::move(l);
  j["export_dumps"] = c.export_dumps;
  return j.dump(2) + "\n";
}

std::string ConfigHash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(HashString(CanonicalConfigJson(c))));
  return buf;
}

std::string_view StageName(Stage s) {
  switch (s) {
    case Stage::kSynth:
      return "synth";
    case Stage::kTrain:
      return "train";
    case Stage::kScore:
      return "score";
    case Stage::kEval:
      return "eval";
    case Stage::kGate:
      return "gate";
    case Stage::kReport:
      return "report";
    case Stage::kAll:
      return "all";
  }
  return "unknown";
}

std::optional<Stage> ParseStage(std::string_view text) {
  for (Stage s : {Stage::kSynth, Stage::kTrain, Stage::kScore, Stage::kEval, Stage::kGate,
                  Stage::kReport, Stage::kAll}) {
    if (StageName(s) == text) return s;
  }
  return std::nullopt;
}

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {
  config_.Validate();
  run_dir_ = config_.output_dir / ConfigHash(config_);
}

fs::path Pipeline::dataset_dir() const { return run_dir_ / "dataset"; }
fs::path Pipeline::model_dir(std::uint64_t seed) const {
  return run_dir_ / "models" / SeedDirName(seed);
}
fs::path Pipeline::score_path(std::uint64_t seed) const {
  return run_dir_ / "scores" / (SeedDirName(seed) + ".csv");
}
fs::path Pipeline::dump_dir(std::uint64_t seed) const {
  return run_dir_ / "scores" / "dumps" / SeedDirName(seed);
}
fs::path Pipeline::eval_path() const { return run_dir_ / "eval" / "metrics.json"; }
fs::path Pipeline::gate_path() const { return run_dir_ / "gate" / "gates.json"; }
fs::path Pipeline::report_path() const { return run_dir_ / "report" / "report.json"; }
fs::path Pipeline::table_path() const { return run_dir_ / "report" / "table.txt"; }

void Pipeline::Run(Stage stage) {
  switch (stage) {
    case Stage::kSynth:
      return Synth();
    case Stage::kTrain:
      return Train();
    case Stage::kScore:
      return Score();
    case Stage::kEval:
      return Eval();
    case Stage::kGate:
      return Gate();
    case Stage::kReport:
      return Report();
    case Stage::kAll:
      Synth();
      Train();
      Score();
      Eval();
      Gate();
      Report();
      return;
  }
}

void Pipeline::Synth() {
  WriteText(run_dir_ / "config.json", CanonicalConfigJson(config_));
  if (!config_.synthetic) return;
  const SyntheticDataset ds = GenerateDataset(*config_.synthetic);
  WriteDataset(ds, dataset_dir());
}

void Pipeline::Train() {
  if (!config_.synthetic) return;
  const fs::path manifest_path = dataset_dir() / "manifest.csv";
  RequireArtifact(manifest_path, "dataset manifest");
  const DatasetManifest manifest = ReadManifest(manifest_path);
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  for (const SampleRecord* r : manifest.WithSplit(Split::kTrain)) {
    const fs::path p = dataset_dir() / "images" / (r->sample_id + ".npy");
    RequireArtifact(p, "training image");
    inputs.push_back(ReadArrayFile(p));
    labels.push_back(r->label);
  }
  const SyntheticSpec& s = *config_.synthetic;
  const ModelSpec spec = TinyConv(s.height, s.width, s.num_classes, config_.train.dropout);
  for (std::uint64_t seed : config_.seeds) {
    TrainConfig tc;
    tc.learning_rate = config_.train.learning_rate;
    tc.momentum = config_.train.momentum;
    tc.epochs = config_.train.epochs;
    tc.batch_size = config_.train.batch_size;
    tc.seed = seed;
    const TrainResult result = oodgate::Train(spec, inputs, labels, tc);
    SaveModel(Model{spec, result.params}, model_dir(seed));
    Json log;
    log["seed"] = seed;
    log["epoch_losses"] = result.epoch_losses;
    WriteText(model_dir(seed) / "train.json", log.dump(2) + "\n");
  }
}

void Pipeline::Score() {
  std::vector<SeedOutputs> outputs;
  std::vector<Model> models;
  DatasetManifest manifest;
  std::map<std::string, Tensor> images;
  if (config_.synthetic) {
    const fs::path manifest_path = dataset_dir() / "manifest.csv";
    RequireArtifact(manifest_path, "dataset manifest");
    manifest = ReadManifest(manifest_path, dataset_dir() / "images");
    images = LoadImages(manifest, dataset_dir() / "images");
    for (std::uint64_t seed : config_.seeds) {
      RequireArtifact(model_dir(seed) / "model.json", "trained model");
      models.push_back(LoadModel(model_dir(seed)));
    }
    for (const Model& m : models) {
      outputs.push_back(ComputeSeedOutputs(manifest, images, m, config_.feature_layer));
    }
  } else {
    const fs::path manifest_path = *config_.external / "manifest.csv";
    RequireArtifact(manifest_path, "external manifest");
    manifest = ReadManifest(manifest_path);
    for (std::uint64_t seed : config_.seeds) {
      const fs::path dir = *config_.external / SeedDirName(seed);
      RequireArtifact(dir, "external dump");
      outputs.push_back(ReadDump(manifest, dir));
    }
  }
  AttachEnsemble(outputs);
  for (std::size_t i = 0; i < config_.seeds.size(); ++i) {
    ScoringOptions opt = config_.scoring;
    opt.seed = config_.seeds[i];
    const ScoredSeed scored = ScoreSeed(outputs[i], opt);
    fs::create_directories(score_path(config_.seeds[i]).parent_path());
    WriteScoreTable(scored.table, score_path(config_.seeds[i]));
    Json chosen = Json::object();
    for (const auto& [k, v] : scored.chosen) chosen[k] = v;
    fs::path chosen_path = score_path(config_.seeds[i]);
    chosen_path.replace_extension(".chosen.json");
    WriteText(chosen_path, chosen.dump(2) + "\n");
    if (config_.export_dumps) WriteDump(outputs[i], dump_dir(config_.seeds[i]));
  }
  if (config_.export_dumps) WriteManifest(manifest, run_dir_ / "scores" / "dumps" / "manifest.csv");
}

std::vector<ScoreTable> Pipeline::LoadScoreTables() const {
  std::vector<ScoreTable> tables;
  for (std::uint64_t seed : config_.seeds) {
    RequireArtifact(score_path(seed), "score table");
    tables.push_back(ReadScoreTable(score_path(seed)));
  }
  return tables;
}

std::vector<std::string> Pipeline::ReportMethods() const {
  std::vector<std::string> out;
  for (const std::string& m : RegisteredMethods()) {
    const auto& wanted = config_.scoring.methods;
    if (std::find(wanted.begin(), wanted.end(), m) != wanted.end()) out.push_back(m);
  }
  return out;
}

void Pipeline::Eval() {
  const std::vector<ScoreTable> tables = LoadScoreTables();
  const EvalReport r =
      BuildReport(config_.seeds, tables, ReportMethods(), {}, config_.percentile);
  WriteText(eval_path(), ReportToJson(r));
}

void Pipeline::Gate() {
  const std::vector<ScoreTable> tables = LoadScoreTables();
  const EvalReport r = BuildReport(config_.seeds, tables, {}, config_.gates, config_.percentile);
  WriteText(gate_path(), ReportToJson(r));
  for (std::size_t s = 0; s < tables.size(); ++s) {
    for (const GatePanel& p : config_.gates) {
      std::vector<GateConfig> gates;
      for (const std::string& m : p.methods) {
        gates.push_back(DeriveGate(tables[s], m, config_.percentile));
      }
      const fs::path dir = run_dir_ / "gate" / SeedDirName(config_.seeds[s]);
      fs::create_directories(dir);
      WriteScoreTable(DualGate(tables[s], gates), dir / (p.name + ".csv"));
    }
  }
}

void Pipeline::Report() {
  const std::vector<ScoreTable> tables = LoadScoreTables();
  const EvalReport r =
      BuildReport(config_.seeds, tables, ReportMethods(), config_.gates, config_.percentile);
  WriteText(report_path(), ReportToJson(r));
  WriteText(table_path(), RenderReportTable(r));
}

}  // namespace oodgate
