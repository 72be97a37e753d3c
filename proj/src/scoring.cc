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

#include "oodgate/scoring.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "oodgate/error.h"
#include "oodgate/eval.h"
#include "oodgate/feature.h"
#include "oodgate/npy.h"
#include "oodgate/parallel.h"
#include "oodgate/rng.h"

namespace oodgate {
namespace {

using Column = std::vector<double>;

const std::vector<std::string> kMethods = {
    "mcp",    "se",   "mls",         "energy", "mcdp_mcp", "mcdp_pe", "mcdp_mi", "de_mcp",
    "gradnorm", "odin", "react", "dice", "mahalanobis", "mbm", "rms", "gram"};

bool Wants(const ScoringOptions& o, std::string_view m) {
  return std::find(o.methods.begin(), o.methods.end(), m) != o.methods.end();
}

double AurocOfColumn(const SeedOutputs& out, const Column& col) {
  std::vector<double> id, ood;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (out.rows[i].variant != Variant::kOriginal) continue;
    (out.rows[i].domain == Domain::kId ? id : ood).push_back(col[i]);
  }
  return Auroc(id, ood);
}

// Index of the grid point with the highest AUROC_OOD; first wins ties.
std::size_t PickBest(const SeedOutputs& out, const std::vector<Column>& grid) {
  std::size_t best = 0;
  double best_auc = -1.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double auc = AurocOfColumn(out, grid[g]);
    if (auc > best_auc) {
      best_auc = auc;
      best = g;
    }
  }
  return best;
}

std::vector<Tensor> LayerVectors(const ForwardTrace& t, std::span<const std::size_t> layers) {
  std::vector<Tensor> v;
  for (std::size_t l : layers) v.push_back(ExtractFeatureVector(t, l));
  return v;
}

std::vector<Tensor> LayerMaps(const ForwardTrace& t, std::span<const std::size_t> layers) {
  std::vector<Tensor> v;
  for (std::size_t l : layers) {
    Require(l < t.outputs.size(), ErrorCode::kMissingLayer,
            "layer " + std::to_string(l) + " does not exist");
    v.push_back(t.outputs[l]);
  }
  return v;
}

const Model& RequireModel(const SeedOutputs& out, std::string_view method) {
  Require(out.model != nullptr, ErrorCode::kInvalidConfig,
          "method " + std::string(method) + " needs the model; dumps cannot provide it");
  return *out.model;
}

Tensor Stack(const std::vector<Tensor>& rows) {
  Require(!rows.empty(), ErrorCode::kEmptySamples, "nothing to stack");
  const std::size_t m = rows[0].size();
  std::vector<double> v;
  v.reserve(rows.size() * m);
  for (const Tensor& r : rows) {
    Require(r.size() == m, ErrorCode::kShapeMismatch, "rows differ in length");
    v.insert(v.end(), r.values().begin(), r.values().end());
  }
  return Tensor(Shape{rows.size(), m}, std::move(v));
}

std::vector<Tensor> Unstack(const Tensor& t, std::size_t expected_rows, const char* what) {
  Require(t.rank() == 2 && t.shape()[0] == expected_rows, ErrorCode::kShapeMismatch,
          std::string(what) + " must have " + std::to_string(expected_rows) + " rows, got " +
              ShapeString(t.shape()));
  const std::size_t m = t.shape()[1];
  const std::vector<double> v = t.ToDoubles();
  std::vector<Tensor> out;
  out.reserve(expected_rows);
  for (std::size_t i = 0; i < expected_rows; ++i) {
    out.push_back(Tensor::Vector(std::vector<double>(v.begin() + static_cast<long>(i * m),
                                                     v.begin() + static_cast<long>((i + 1) * m))));
  }
  return out;
}

std::vector<Tensor> FieldOf(const std::vector<LogitRecord>& r, Tensor LogitRecord::*field) {
  std::vector<Tensor> out;
  out.reserve(r.size());
  for (const LogitRecord& x : r) out.push_back(x.*field);
  return out;
}

}  // namespace

const std::vector<std::string>& RegisteredMethods() { return kMethods; }

bool IsRegisteredMethod(std::string_view method) {
  return std::find(kMethods.begin(), kMethods.end(), method) != kMethods.end();
}

bool NeedsModel(std::string_view m) {
  return m == "mcdp_mcp" || m == "mcdp_pe" || m == "mcdp_mi" || m == "odin" || m == "mbm" ||
         m == "gram";
}

std::vector<EvalRow> EvalRowsOf(const DatasetManifest& manifest) {
  std::vector<EvalRow> rows;
  for (const SampleRecord& r : manifest.records) {
    if (r.split == Split::kTrain) continue;
    rows.push_back({r.sample_id, Variant::kOriginal,
                    r.split == Split::kIdTest ? Domain::kId : Domain::kOod, r.label});
  }
  for (const SampleRecord& r : manifest.records) {
    if (r.split != Split::kOodTest) continue;
    Require(r.counterfactual_id.has_value(), ErrorCode::kInvariantViolation,
            "ood_test row " + r.sample_id + " has no counterfactual");
    rows.push_back({r.sample_id, Variant::kCounterfactual, Domain::kOod, r.label});
  }
  return rows;
}

SeedOutputs ComputeSeedOutputs(const DatasetManifest& manifest,
                               const std::map<std::string, Tensor>& images, const Model& model,
                               std::size_t feature_layer) {
  const auto image = [&](const std::string& id) -> const Tensor& {
    const auto it = images.find(id);
    Require(it != images.end(), ErrorCode::kMissingArtifact, "no image for " + id);
    return it->second;
  };
  SeedOutputs out;
  out.model = &model;
  for (const SampleRecord& r : manifest.records) {
    if (r.split != Split::kTrain) continue;
    out.train_labels.push_back(r.label);
    out.train_images.push_back(image(r.sample_id));
  }
  out.rows = EvalRowsOf(manifest);
  for (const EvalRow& row : out.rows) {
    const SampleRecord* rec = manifest.Find(row.sample_id);
    out.images.push_back(image(row.variant == Variant::kOriginal ? row.sample_id
                                                                 : *rec->counterfactual_id));
  }

  const auto run = [&](const std::vector<Tensor>& xs, std::vector<LogitRecord>& records,
                       std::vector<Tensor>& features) {
    records.resize(xs.size());
    features.resize(xs.size());
    ParallelFor(xs.size(), [&](std::size_t i) {
      const ForwardTrace t = Forward(model.spec, model.params, xs[i]);
      records[i] = LogitRecord::FromTrace(model.spec, model.params, t);
      features[i] = ExtractFeatureVector(t, feature_layer);
    });
  };
  run(out.train_images, out.train_records, out.train_features);
  run(out.images, out.records, out.features);
  return out;
}

void AttachEnsemble(std::span<SeedOutputs> seeds) {
  Require(!seeds.empty(), ErrorCode::kEmptySamples, "no ensemble members");
  const std::size_t n = seeds[0].records.size();
  for (const SeedOutputs& s : seeds) {
    Require(s.records.size() == n, ErrorCode::kShapeMismatch,
            "ensemble members cover different rows");
  }
  std::vector<std::vector<Tensor>> members(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const SeedOutputs& s : seeds) members[i].push_back(s.records[i].softmax);
  }
  for (SeedOutputs& s : seeds) s.ensemble_softmax = members;
}

ScoredSeed ScoreSeed(const SeedOutputs& out, const ScoringOptions& opt) {
  const std::size_t n = out.rows.size();
  Require(n > 0 && out.records.size() == n && out.features.size() == n,
          ErrorCode::kShapeMismatch, "seed outputs do not cover every row");
  for (const std::string& m : opt.methods) {
    Require(IsRegisteredMethod(m), ErrorCode::kInvalidConfig, "unknown method '" + m + "'");
  }
  std::map<std::string, Column> cols;
  ScoredSeed result;
  const auto each = [&](const std::string& name, auto&& fn) {
    Column c(n);
    ParallelFor(n, [&](std::size_t i) { c[i] = fn(i); });
    cols[name] = std::move(c);
  };
  const auto& rec = out.records;

  if (Wants(opt, "mcp")) each("mcp", [&](std::size_t i) { return ScoreMcp(rec[i]); });
  if (Wants(opt, "se")) each("se", [&](std::size_t i) { return ScoreShannonEntropy(rec[i]); });
  if (Wants(opt, "mls")) each("mls", [&](std::size_t i) { return ScoreMaxLogit(rec[i]); });
  if (Wants(opt, "energy")) each("energy", [&](std::size_t i) { return ScoreEnergy(rec[i]); });
  if (Wants(opt, "gradnorm")) {
    each("gradnorm", [&](std::size_t i) { return ScoreGradNorm(rec[i]); });
  }

  if (Wants(opt, "de_mcp")) {
    Require(out.ensemble_softmax.size() == n, ErrorCode::kInvalidConfig,
            "de_mcp needs ensemble members for every row");
    each("de_mcp", [&](std::size_t i) { return ScoreDeMcp(out.ensemble_softmax[i]); });
  }

  if (Wants(opt, "mcdp_mcp") || Wants(opt, "mcdp_pe") || Wants(opt, "mcdp_mi")) {
    const Model& model = RequireModel(out, "mcdp");
    Column mcp(n), pe(n), mi(n);
    ParallelFor(n, [&](std::size_t i) {
      const std::uint64_t key = DeriveStream(
          opt.seed, HashString(out.rows[i].sample_id + "/" +
                               std::string(VariantName(out.rows[i].variant))));
      const std::vector<Tensor> s =
          McDropoutSample(model.spec, model.params, out.images[i], std::nullopt,
                          opt.mcdp_samples, key);
      mcp[i] = ScoreMcdp(s, McdpVariant::kMcp);
      pe[i] = ScoreMcdp(s, McdpVariant::kPredictiveEntropy);
      mi[i] = ScoreMcdp(s, McdpVariant::kMutualInformation);
    });
    if (Wants(opt, "mcdp_mcp")) cols["mcdp_mcp"] = std::move(mcp);
    if (Wants(opt, "mcdp_pe")) cols["mcdp_pe"] = std::move(pe);
    if (Wants(opt, "mcdp_mi")) cols["mcdp_mi"] = std::move(mi);
  }

  if (Wants(opt, "odin")) {
    const Model& model = RequireModel(out, "odin");
    const std::size_t ne = opt.odin_epsilons.size();
    Require(!opt.odin_temperatures.empty() && ne > 0, ErrorCode::kInvalidConfig,
            "empty ODIN grid");
    std::vector<Column> grid(opt.odin_temperatures.size() * ne, Column(n));
    ParallelFor(n, [&](std::size_t i) {
      for (std::size_t t = 0; t < opt.odin_temperatures.size(); ++t) {
        const std::vector<double> s = OdinScores(model.spec, model.params, out.images[i],
                                                 opt.odin_temperatures[t], opt.odin_epsilons);
        for (std::size_t e = 0; e < ne; ++e) grid[t * ne + e][i] = s[e];
      }
    });
    const std::size_t best = PickBest(out, grid);
    result.chosen["odin.temperature"] = opt.odin_temperatures[best / ne];
    result.chosen["odin.epsilon"] = opt.odin_epsilons[best % ne];
    cols["odin"] = std::move(grid[best]);
  }

  if (Wants(opt, "react")) {
    Require(!out.train_records.empty() && !opt.react_percentiles.empty(),
            ErrorCode::kMissingFitStatistics, "ReAct needs training activations and a grid");
    std::vector<double> pooled;
    for (const LogitRecord& r : out.train_records) {
      pooled.insert(pooled.end(), r.penultimate_features.values().begin(),
                    r.penultimate_features.values().end());
    }
    std::vector<Column> grid;
    std::vector<double> clamps;
    for (double q : opt.react_percentiles) {
      const double c = PercentileThreshold(pooled, q);
      clamps.push_back(c);
      Column col(n);
      ParallelFor(n, [&](std::size_t i) { col[i] = ScoreReact(rec[i], c); });
      grid.push_back(std::move(col));
    }
    const std::size_t best = PickBest(out, grid);
    result.chosen["react.percentile"] = opt.react_percentiles[best];
    result.chosen["react.clamp"] = clamps[best];
    cols["react"] = std::move(grid[best]);
  }

  if (Wants(opt, "dice")) {
    Require(!out.train_records.empty() && !opt.dice_keep.empty(),
            ErrorCode::kMissingFitStatistics, "DICE needs training activations and a grid");
    const std::size_t m = out.train_records[0].penultimate_features.size();
    std::vector<double> mean(m, 0.0);
    for (const LogitRecord& r : out.train_records) {
      for (std::size_t j = 0; j < m; ++j) mean[j] += r.penultimate_features[j];
    }
    for (double& v : mean) v /= static_cast<double>(out.train_records.size());
    std::vector<Column> grid;
    for (double p : opt.dice_keep) {
      const std::vector<std::uint8_t> mask = DiceMask(mean, rec[0].last_layer_weights, p);
      Column col(n);
      ParallelFor(n, [&](std::size_t i) { col[i] = ScoreDiceMasked(rec[i], mask); });
      grid.push_back(std::move(col));
    }
    const std::size_t best = PickBest(out, grid);
    result.chosen["dice.keep"] = opt.dice_keep[best];
    cols["dice"] = std::move(grid[best]);
  }

  if (Wants(opt, "mahalanobis") || Wants(opt, "rms")) {
    const ClassGaussianStats stats = FitClassGaussians(out.train_features, out.train_labels);
    if (Wants(opt, "mahalanobis")) {
      each("mahalanobis",
           [&](std::size_t i) { return ScoreMahalanobis(out.features[i].values(), stats); });
    }
    if (Wants(opt, "rms")) {
      const BackgroundGaussianStats bg = FitBackgroundGaussian(out.train_features);
      each("rms", [&](std::size_t i) { return ScoreRms(out.features[i].values(), stats, bg); });
    }
  }

  if (Wants(opt, "mbm") || Wants(opt, "gram")) {
    const Model& model = RequireModel(out, "mbm/gram");
    const std::size_t nt = out.train_images.size();
    std::vector<std::vector<Tensor>> train_vecs(nt), train_maps(nt);
    ParallelFor(nt, [&](std::size_t i) {
      const ForwardTrace t = Forward(model.spec, model.params, out.train_images[i]);
      if (Wants(opt, "mbm")) train_vecs[i] = LayerVectors(t, opt.mbm_layers);
      if (Wants(opt, "gram")) train_maps[i] = LayerMaps(t, opt.gram_layers);
    });
    std::vector<std::vector<Tensor>> eval_vecs(n), eval_maps(n);
    ParallelFor(n, [&](std::size_t i) {
      const ForwardTrace t = Forward(model.spec, model.params, out.images[i]);
      if (Wants(opt, "mbm")) eval_vecs[i] = LayerVectors(t, opt.mbm_layers);
      if (Wants(opt, "gram")) eval_maps[i] = LayerMaps(t, opt.gram_layers);
    });

    if (Wants(opt, "mbm")) {
      const std::size_t nl = opt.mbm_layers.size();
      std::vector<ClassGaussianStats> stats;
      std::vector<std::vector<Tensor>> fold(nl);
      for (std::size_t l = 0; l < nl; ++l) {
        std::vector<Tensor> per_layer;
        for (std::size_t i = 0; i < nt; ++i) {
          per_layer.push_back(train_vecs[i][l]);
          if (i % 10 == 9) fold[l].push_back(train_vecs[i][l]);
        }
        if (fold[l].empty()) fold[l] = per_layer;
        stats.push_back(FitClassGaussians(per_layer, out.train_labels));
      }
      const LayerSelection sel = FitLayerSelection(opt.mbm_layers, fold, stats);
      for (std::size_t l = 0; l < nl; ++l) {
        result.chosen["mbm.normalizer." + std::to_string(opt.mbm_layers[l])] = sel.normalizers[l];
      }
      each("mbm", [&](std::size_t i) { return ScoreMbm(eval_vecs[i], sel, stats); });
    }
    if (Wants(opt, "gram")) {
      const GramReference ref =
          FitGramReference(train_maps, out.train_labels, opt.gram_layers, opt.gram_orders);
      each("gram", [&](std::size_t i) {
        const int pred = static_cast<int>(Argmax(rec[i].softmax.values()));
        return ScoreGram(eval_maps[i], ref, pred);
      });
    }
  }

  std::vector<std::string> names;
  for (const auto& [name, col] : cols) names.push_back(name);
  ScoreTable table(names);
  for (std::size_t i = 0; i < n; ++i) {
    ScoreRow row;
    row.sample_id = out.rows[i].sample_id;
    row.variant = out.rows[i].variant;
    row.domain = out.rows[i].domain;
    row.true_label = out.rows[i].label;
    row.predicted_label = static_cast<int>(Argmax(rec[i].softmax.values()));
    for (const std::string& m : table.methods()) row.scores.push_back(cols[m][i]);
    table.AddRow(std::move(row));
  }
  table.Canonicalize();
  result.table = std::move(table);
  return result;
}

void WriteDump(const SeedOutputs& out, const std::filesystem::path& dir) {
  Require(!out.records.empty() && !out.train_records.empty(), ErrorCode::kEmptySamples,
          "nothing to dump");
  std::filesystem::create_directories(dir);
  WriteArrayFile(Stack(FieldOf(out.train_records, &LogitRecord::logits)),
                 dir / "train_logits.npy");
  WriteArrayFile(Stack(out.train_features), dir / "train_features.npy");
  WriteArrayFile(Stack(FieldOf(out.train_records, &LogitRecord::penultimate_features)),
                 dir / "train_penultimate.npy");
  WriteArrayFile(Stack(FieldOf(out.records, &LogitRecord::logits)), dir / "logits.npy");
  WriteArrayFile(Stack(out.features), dir / "features.npy");
  WriteArrayFile(Stack(FieldOf(out.records, &LogitRecord::penultimate_features)),
                 dir / "penultimate.npy");
  WriteArrayFile(out.records[0].last_layer_weights, dir / "last_layer_weight.npy");
  WriteArrayFile(out.records[0].last_layer_bias, dir / "last_layer_bias.npy");
}

SeedOutputs ReadDump(const DatasetManifest& manifest, const std::filesystem::path& dir) {
  const auto read = [&](const char* name) {
    const auto path = dir / name;
    Require(std::filesystem::exists(path), ErrorCode::kMissingArtifact,
            "missing dump array " + path.string());
    return ReadArrayFile(path).WithDType(DType::kFloat64);
  };
  SeedOutputs out;
  for (const SampleRecord& r : manifest.records) {
    if (r.split == Split::kTrain) out.train_labels.push_back(r.label);
  }
  out.rows = EvalRowsOf(manifest);
  const Tensor w = read("last_layer_weight.npy");
  const Tensor b = read("last_layer_bias.npy");
  const auto records = [&](const char* logits, const char* pen, std::size_t rows) {
    const std::vector<Tensor> l = Unstack(read(logits), rows, logits);
    const std::vector<Tensor> p = Unstack(read(pen), rows, pen);
    std::vector<LogitRecord> r;
    r.reserve(rows);
    for (std::size_t i = 0; i < rows; ++i) r.push_back(LogitRecord::Make(l[i], p[i], w, b));
    return r;
  };
  out.train_records =
      records("train_logits.npy", "train_penultimate.npy", out.train_labels.size());
  out.train_features =
      Unstack(read("train_features.npy"), out.train_labels.size(), "train_features.npy");
  out.records = records("logits.npy", "penultimate.npy", out.rows.size());
  out.features = Unstack(read("features.npy"), out.rows.size(), "features.npy");
  return out;
}

}  // namespace oodgate
