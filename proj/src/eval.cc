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

#include "oodgate/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "json.hpp"
#include "oodgate/error.h"
#include "oodgate/parallel.h"

namespace oodgate {

using Json = nlohmann::ordered_json;

namespace {

MetricSummary Summarize(std::vector<std::optional<double>> per_seed) {
  MetricSummary s;
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& v : per_seed) {
    if (!v) continue;
    total += *v;
    ++n;
  }
  if (n > 0) s.mean = total / static_cast<double>(n);
  s.per_seed = std::move(per_seed);
  return s;
}

// nullopt when one side of the split is empty.
template <typename F>
std::optional<double> Defined(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kEmptyClassOfScores) return std::nullopt;
    throw;
  }
}

Json OptionalJson(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json SummaryJson(const MetricSummary& s) {
  Json j;
  j["mean"] = OptionalJson(s.mean);
  j["per_seed"] = Json::array();
  for (const auto& v : s.per_seed) j["per_seed"].push_back(OptionalJson(v));
  return j;
}

double Percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

std::string Cell(const std::optional<double>& v, double scale, int width) {
  char buf[32];
  if (v) {
    std::snprintf(buf, sizeof buf, "%*.1f", width, *v * scale);
  } else {
    std::snprintf(buf, sizeof buf, "%*s", width, "-");
  }
  return buf;
}

}  // namespace

LabelledScores ExtractScores(const ScoreTable& table, std::string_view method, Variant variant) {
  const std::size_t col = table.Column(method);
  LabelledScores out;
  for (const ScoreRow& row : table.rows()) {
    if (row.variant != variant) continue;
    const double s = row.scores[col];
    if (!std::isfinite(s)) {
      throw Error(ErrorCode::kInvariantViolation,
                  "non-finite " + std::string(method) + " score for " + row.sample_id);
    }
    out.push_back({row.sample_id, s, row.domain, row.correct()});
  }
  return out;
}

double Auroc(std::span<const double> pos, std::span<const double> neg) {
  Require(!pos.empty() && !neg.empty(), ErrorCode::kEmptyClassOfScores,
          "AUROC needs at least one positive and one negative score");
  std::vector<double> sorted(neg.begin(), neg.end());
  std::sort(sorted.begin(), sorted.end());
  // Twice the tie-corrected win count, kept integral until the final division.
  std::uint64_t twice = 0;
  for (double p : pos) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), p);
    const auto hi = std::upper_bound(lo, sorted.end(), p);
    twice += 2 * static_cast<std::uint64_t>(lo - sorted.begin()) +
             static_cast<std::uint64_t>(hi - lo);
  }
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double AurocOod(const LabelledScores& s) {
  std::vector<double> id, ood;
  for (const auto& r : s) (r.domain == Domain::kId ? id : ood).push_back(r.score);
  return Auroc(id, ood);
}

double AurocF(const LabelledScores& s) {
  std::vector<double> ok, bad;
  for (const auto& r : s) (r.correct ? ok : bad).push_back(r.score);
  return Auroc(ok, bad);
}

double AurocF(const LabelledScores& s, Domain domain) {
  LabelledScores part;
  for (const auto& r : s) {
    if (r.domain == domain) part.push_back(r);
  }
  return AurocF(part);
}

double PercentileThreshold(std::span<const double> scores, double q) {
  Require(!scores.empty(), ErrorCode::kEmptyScores, "percentile of an empty score list");
  Require(q >= 0.0 && q <= 100.0, ErrorCode::kInvariantViolation, "percentile must be in [0,100]");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  const double rank = std::ceil(q / 100.0 * n);
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return sorted[std::min(idx, sorted.size() - 1)];
}

GateConfig DeriveGate(const ScoreTable& table, std::string_view method, double q,
                      std::string derivation_set) {
  const std::size_t col = table.Column(method);
  std::vector<double> id;
  for (const ScoreRow& row : table.rows()) {
    if (row.variant == Variant::kOriginal && row.domain == Domain::kId) {
      id.push_back(row.scores[col]);
    }
  }
  return GateConfig{std::string(method), PercentileThreshold(id, q), q,
                    std::move(derivation_set)};
}

ScoreTable ApplyGate(const ScoreTable& table, const GateConfig& gate) {
  const std::size_t col = table.Column(gate.method);
  return table.Filter([&](const ScoreRow& row) { return row.scores[col] >= gate.threshold; });
}

ScoreTable DualGate(const ScoreTable& table, std::span<const GateConfig> gates) {
  ScoreTable out = table;
  for (const GateConfig& g : gates) out = ApplyGate(out, g);
  return out;
}

std::string_view ImpactCategoryName(ImpactCategory c) {
  switch (c) {
    case ImpactCategory::kCorrectUnaffected:
      return "correct_unaffected";
    case ImpactCategory::kIncorrectUnaffected:
      return "incorrect_unaffected";
    case ImpactCategory::kCorrectOnlyWithArtefact:
      return "correct_only_with_artefact";
    case ImpactCategory::kCorrectOnlyWithoutArtefact:
      return "correct_only_without_artefact";
  }
  return "unknown";
}

ImpactCategory Categorise(int pred_with_artefact, int pred_without_artefact, int true_label) {
  const bool with = pred_with_artefact == true_label;
  const bool without = pred_without_artefact == true_label;
  if (with && without) return ImpactCategory::kCorrectUnaffected;
  if (!with && !without) return ImpactCategory::kIncorrectUnaffected;
  return with ? ImpactCategory::kCorrectOnlyWithArtefact
              : ImpactCategory::kCorrectOnlyWithoutArtefact;
}

std::vector<GatePanel> DefaultGatePanels() {
  return {{"original", {}},
          {"confidence", {"mcp"}},
          {"feature", {"mahalanobis"}},
          {"combined", {"mahalanobis", "mcp"}}};
}

double GateSeedResult::id_retained_pct() const { return Percent(id_retained, id_total); }
double GateSeedResult::ood_retained_pct() const { return Percent(ood_retained, ood_total); }
std::optional<double> GateSeedResult::retained_accuracy() const {
  const std::size_t n = id_retained + ood_retained;
  if (n == 0) return std::nullopt;
  return static_cast<double>(retained_correct) / static_cast<double>(n);
}

GateSeedResult EvaluateGatePanel(const ScoreTable& table, const GatePanel& panel,
                                 double percentile) {
  GateSeedResult r;
  std::vector<GateConfig> gates;
  for (const std::string& m : panel.methods) gates.push_back(DeriveGate(table, m, percentile));
  for (const GateConfig& g : gates) r.thresholds.push_back(g.threshold);

  std::map<std::string, int, std::less<>> counterfactual_pred;
  for (const ScoreRow& row : table.rows()) {
    if (row.variant == Variant::kOriginal) {
      (row.domain == Domain::kId ? r.id_total : r.ood_total) += 1;
    } else {
      counterfactual_pred.emplace(row.sample_id, row.predicted_label);
    }
  }

  const ScoreTable kept = DualGate(table, gates);
  for (const ScoreRow& row : kept.rows()) {
    if (row.variant != Variant::kOriginal) continue;
    if (row.correct()) ++r.retained_correct;
    if (row.domain == Domain::kId) {
      ++r.id_retained;
      continue;
    }
    ++r.ood_retained;
    const auto it = counterfactual_pred.find(row.sample_id);
    Require(it != counterfactual_pred.end(), ErrorCode::kSchemaMismatch,
            "OOD row " + row.sample_id + " has no counterfactual row");
    const ImpactCategory c = Categorise(row.predicted_label, it->second, row.true_label);
    ++r.categories[static_cast<std::size_t>(c)];
  }
  return r;
}

EvalReport BuildReport(std::span<const std::uint64_t> seeds, std::span<const ScoreTable> tables,
                       std::span<const std::string> methods, std::span<const GatePanel> panels,
                       double percentile) {
  Require(!seeds.empty() && seeds.size() == tables.size(), ErrorCode::kSeedCountMismatch,
          std::to_string(seeds.size()) + " seeds but " + std::to_string(tables.size()) +
              " score tables");
  const std::size_t n = seeds.size();
  EvalReport report;
  report.seeds.assign(seeds.begin(), seeds.end());
  report.percentile = percentile;

  // [seed][method] -> {ood, f, f_id, f_ood}
  std::vector<std::vector<std::array<std::optional<double>, 4>>> metrics(n);
  std::vector<std::vector<GateSeedResult>> gate_results(n);
  ParallelFor(n, [&](std::size_t s) {
    for (const std::string& m : methods) {
      const LabelledScores ls = ExtractScores(tables[s], m);
      metrics[s].push_back({Defined([&] { return AurocOod(ls); }),
                            Defined([&] { return AurocF(ls); }),
                            Defined([&] { return AurocF(ls, Domain::kId); }),
                            Defined([&] { return AurocF(ls, Domain::kOod); })});
    }
    for (const GatePanel& p : panels) {
      gate_results[s].push_back(EvaluateGatePanel(tables[s], p, percentile));
    }
  });

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::array<std::vector<std::optional<double>>, 4> cols;
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t k = 0; k < 4; ++k) cols[k].push_back(metrics[s][mi][k]);
    }
    report.methods.push_back({methods[mi], Summarize(cols[0]), Summarize(cols[1]),
                              Summarize(cols[2]), Summarize(cols[3])});
  }
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    GateReport g{panels[pi], {}};
    for (std::size_t s = 0; s < n; ++s) g.per_seed.push_back(gate_results[s][pi]);
    report.gates.push_back(std::move(g));
  }
  return report;
}

std::string ReportToJson(const EvalReport& report) {
  Json j;
  j["seeds"] = report.seeds;
  j["percentile"] = report.percentile;
  j["methods"] = Json::object();
  for (const MethodReport& m : report.methods) {
    Json mj;
    mj["auroc_ood"] = SummaryJson(m.auroc_ood);
    mj["auroc_f"] = SummaryJson(m.auroc_f);
    mj["auroc_f_id"] = SummaryJson(m.auroc_f_id);
    mj["auroc_f_ood"] = SummaryJson(m.auroc_f_ood);
    j["methods"][m.method] = std::move(mj);
  }
  j["gates"] = Json::object();
  for (const GateReport& g : report.gates) {
    Json gj;
    gj["methods"] = g.panel.methods;
    std::vector<std::optional<double>> id_pct, ood_pct, acc;
    std::array<std::vector<std::optional<double>>, 4> cat_pct;
    Json seeds = Json::array();
    for (const GateSeedResult& r : g.per_seed) {
      id_pct.push_back(r.id_retained_pct());
      ood_pct.push_back(r.ood_retained_pct());
      acc.push_back(r.retained_accuracy());
      Json sj;
      sj["thresholds"] = r.thresholds;
      sj["id_total"] = r.id_total;
      sj["id_retained"] = r.id_retained;
      sj["ood_total"] = r.ood_total;
      sj["ood_retained"] = r.ood_retained;
      sj["retained_correct"] = r.retained_correct;
      Json cj;
      for (std::size_t c = 0; c < 4; ++c) {
        cj[std::string(ImpactCategoryName(kImpactCategories[c]))] = r.categories[c];
        cat_pct[c].push_back(r.ood_retained == 0
                                 ? std::nullopt
                                 : std::optional<double>(Percent(r.categories[c], r.ood_retained)));
      }
      sj["ood_categories"] = std::move(cj);
      seeds.push_back(std::move(sj));
    }
    gj["id_retained_pct"] = SummaryJson(Summarize(id_pct));
    gj["ood_retained_pct"] = SummaryJson(Summarize(ood_pct));
    gj["retained_accuracy"] = SummaryJson(Summarize(acc));
    Json cats;
    for (std::size_t c = 0; c < 4; ++c) {
      cats[std::string(ImpactCategoryName(kImpactCategories[c]))] =
          SummaryJson(Summarize(cat_pct[c]));
    }
    gj["ood_category_pct"] = std::move(cats);
    gj["per_seed"] = std::move(seeds);
    j["gates"][g.panel.name] = std::move(gj);
  }
  return j.dump(2) + "\n";
}

std::string RenderReportTable(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %8s %8s   (mean of %zu seeds, %%)\n", "method",
                "AUC_OOD", "AUC_f", report.seeds.size());
  out << line;
  for (const MethodReport& m : report.methods) {
    out << (m.method.size() < 14 ? m.method + std::string(14 - m.method.size(), ' ') : m.method)
        << ' ' << Cell(m.auroc_ood.mean, 100.0, 8) << ' ' << Cell(m.auroc_f.mean, 100.0, 8)
        << "\n";
  }
  out << "\n";
  std::snprintf(line, sizeof line, "%-12s %-22s %8s %8s %8s\n", "gate", "methods", "ID%",
                "OOD%", "acc%");
  out << line;
  for (const GateReport& g : report.gates) {
    std::vector<std::optional<double>> id_pct, ood_pct, acc;
    for (const GateSeedResult& r : g.per_seed) {
      id_pct.push_back(r.id_retained_pct());
      ood_pct.push_back(r.ood_retained_pct());
      acc.push_back(r.retained_accuracy());
    }
    std::string chain;
    for (const std::string& m : g.panel.methods) chain += (chain.empty() ? "" : ">") + m;
    if (chain.empty()) chain = "-";
    std::snprintf(line, sizeof line, "%-12s %-22s %s %s %s\n", g.panel.name.c_str(),
                  chain.c_str(), Cell(Summarize(id_pct).mean, 1.0, 8).c_str(),
                  Cell(Summarize(ood_pct).mean, 1.0, 8).c_str(),
                  Cell(Summarize(acc).mean, 100.0, 8).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace oodgate
