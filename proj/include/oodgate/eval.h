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

// Detection metrics, percentile gates, artefact impact categories and the
// multi-seed report.

#ifndef OODGATE_EVAL_H_
#define OODGATE_EVAL_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oodgate/score_table.h"

namespace oodgate {

struct LabelledScore {
  std::string sample_id;
  double score = 0.0;
  Domain domain = Domain::kId;
  bool correct = false;
};
using LabelledScores = std::vector<LabelledScore>;

// Rows of `variant` for one method column.
LabelledScores ExtractScores(const ScoreTable& table, std::string_view method,
                             Variant variant = Variant::kOriginal);

// Tie-corrected Mann-Whitney AUROC: P(pos > neg) + 0.5 P(pos == neg).
// Throws EmptyClassOfScores when either side is empty.
double Auroc(std::span<const double> pos, std::span<const double> neg);

// ID rows positive, OOD rows negative.
double AurocOod(const LabelledScores& s);
// Correct predictions positive, incorrect negative, pooled over domains.
double AurocF(const LabelledScores& s);
// Same, restricted to one domain.
double AurocF(const LabelledScores& s, Domain domain);

// Nearest rank: sorted[ceil(q / 100 * N) - 1], with q = 0 giving the minimum.
double PercentileThreshold(std::span<const double> scores, double q);

struct GateConfig {
  std::string method;
  double threshold = 0.0;
  double percentile = 75.0;
  std::string derivation_set;
};

// Threshold at percentile q of the original-variant ID rows.
GateConfig DeriveGate(const ScoreTable& table, std::string_view method, double q,
                      std::string derivation_set = "id_test");

// Keeps rows whose score is >= threshold, in their original order.
ScoreTable ApplyGate(const ScoreTable& table, const GateConfig& gate);
// Applies the gates one after another.
ScoreTable DualGate(const ScoreTable& table, std::span<const GateConfig> gates);

enum class ImpactCategory {
  kCorrectUnaffected,
  kIncorrectUnaffected,
  kCorrectOnlyWithArtefact,
  kCorrectOnlyWithoutArtefact,
};
inline constexpr std::array<ImpactCategory, 4> kImpactCategories = {
    ImpactCategory::kCorrectUnaffected, ImpactCategory::kIncorrectUnaffected,
    ImpactCategory::kCorrectOnlyWithArtefact, ImpactCategory::kCorrectOnlyWithoutArtefact};

std::string_view ImpactCategoryName(ImpactCategory c);
ImpactCategory Categorise(int pred_with_artefact, int pred_without_artefact, int true_label);

// A named Fig-3-style panel: gates applied in order (none for the baseline).
struct GatePanel {
  std::string name;
  std::vector<std::string> methods;
};

// original / confidence (mcp) / feature (mahalanobis) / combined.
std::vector<GatePanel> DefaultGatePanels();

struct MetricSummary {
  std::vector<std::optional<double>> per_seed;
  // Mean over the seeds where the metric is defined.
  std::optional<double> mean;
};

struct MethodReport {
  std::string method;
  MetricSummary auroc_ood;
  MetricSummary auroc_f;
  MetricSummary auroc_f_id;
  MetricSummary auroc_f_ood;
};

struct GateSeedResult {
  std::vector<double> thresholds;
  std::size_t id_total = 0;
  std::size_t id_retained = 0;
  std::size_t ood_total = 0;
  std::size_t ood_retained = 0;
  std::size_t retained_correct = 0;
  // Counts over retained OOD rows, indexed like kImpactCategories.
  std::array<std::size_t, 4> categories{};

  double id_retained_pct() const;
  double ood_retained_pct() const;
  // Empty when nothing is retained.
  std::optional<double> retained_accuracy() const;
};

struct GateReport {
  GatePanel panel;
  std::vector<GateSeedResult> per_seed;
};

struct EvalReport {
  std::vector<std::uint64_t> seeds;
  double percentile = 75.0;
  std::vector<MethodReport> methods;
  std::vector<GateReport> gates;
};

// One table per seed. Throws SeedCountMismatch when the counts differ or no
// seed is given.
EvalReport BuildReport(std::span<const std::uint64_t> seeds,
                       std::span<const ScoreTable> tables,
                       std::span<const std::string> methods,
                       std::span<const GatePanel> panels, double percentile = 75.0);

// Stats for one seed's table under one panel.
GateSeedResult EvaluateGatePanel(const ScoreTable& table, const GatePanel& panel,
                                 double percentile);

// Fixed key order; equal reports serialize to identical bytes.
std::string ReportToJson(const EvalReport& report);
// Methods x {AUC_OOD, AUC_f} in percent, followed by the gate panels.
std::string RenderReportTable(const EvalReport& report);

}  // namespace oodgate

#endif  // OODGATE_EVAL_H_
