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

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "oodgate/eval.h"
#include "oracles.h"
#include "test_util.h"

namespace oodgate {
namespace {

// Scores drawn from a tiny grid so ties are common.
std::vector<double> TiedScores(CounterRng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = static_cast<double>(rng.Below(6)) * 0.25;
  return v;
}

TEST(Auroc, FrozenFixture) {
  EXPECT_EQ(Auroc(std::vector<double>{0.9, 0.8, 0.8, 0.3}, std::vector<double>{0.8, 0.1, 0.5}),
            0.75);
  EXPECT_EQ(Auroc(std::vector<double>{1.0}, std::vector<double>{1.0}), 0.5);
}

TEST(Auroc, MatchesPairEnumeration) {
  CounterRng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t np = 1 + rng.Below(20), nn = 1 + rng.Below(20);
    const bool ties = trial % 2 == 0;
    const std::vector<double> pos = ties ? TiedScores(rng, np) : testing::RandomVector(rng, np);
    const std::vector<double> neg = ties ? TiedScores(rng, nn) : testing::RandomVector(rng, nn);
    EXPECT_EQ(Auroc(pos, neg), oracles::PairwiseAuroc(pos, neg));
    EXPECT_EQ(Auroc(pos, neg) + Auroc(neg, pos), 1.0);
  }
}

TEST(Auroc, InvariantToMonotoneTransforms) {
  CounterRng rng(78);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> pos = testing::RandomVector(rng, 15), neg = testing::RandomVector(rng, 9);
    const double before = Auroc(pos, neg);
    for (double& v : pos) v = std::exp(3.0 * v) + 1.0;
    for (double& v : neg) v = std::exp(3.0 * v) + 1.0;
    EXPECT_EQ(Auroc(pos, neg), before);
  }
}

TEST(Auroc, EmptySideThrows) {
  EXPECT_OODGATE_ERROR(Auroc(std::vector<double>{}, std::vector<double>{1.0}),
                       ErrorCode::kEmptyClassOfScores);
  EXPECT_OODGATE_ERROR(Auroc(std::vector<double>{1.0}, std::vector<double>{}),
                       ErrorCode::kEmptyClassOfScores);
}

TEST(Auroc, LabelledVariants) {
  const LabelledScores s = {{"a", 0.9, Domain::kId, true},
                            {"b", 0.2, Domain::kId, false},
                            {"c", 0.6, Domain::kOod, true},
                            {"d", 0.1, Domain::kOod, false}};
  EXPECT_EQ(AurocOod(s), 0.75);
  EXPECT_EQ(AurocF(s), 1.0);
  EXPECT_EQ(AurocF(s, Domain::kId), 1.0);
  const LabelledScores all_correct = {{"a", 0.9, Domain::kId, true}};
  EXPECT_OODGATE_ERROR(AurocF(all_correct), ErrorCode::kEmptyClassOfScores);
}

TEST(Percentile, NearestRank) {
  const std::vector<double> v = {5, 1, 8, 3, 7, 2, 6, 4};
  EXPECT_EQ(PercentileThreshold(v, 75.0), 6.0);
  EXPECT_EQ(PercentileThreshold(v, 0.0), 1.0);
  EXPECT_EQ(PercentileThreshold(v, 100.0), 8.0);
  EXPECT_EQ(PercentileThreshold(v, 50.0), 4.0);
  EXPECT_EQ(PercentileThreshold(v, 12.5), 1.0);
  EXPECT_EQ(PercentileThreshold(v, 12.6), 2.0);
  EXPECT_OODGATE_ERROR(PercentileThreshold(std::vector<double>{}, 75.0), ErrorCode::kEmptyScores);
}

ScoreTable IdTable(const std::vector<double>& scores) {
  ScoreTable t({"m"});
  for (std::size_t i = 0; i < scores.size(); ++i) {
    t.AddRow({"id_" + std::to_string(i), Variant::kOriginal, Domain::kId, 0, 0, {scores[i]}});
  }
  return t;
}

TEST(Gate, RetainsNearestRankCount) {
  CounterRng rng(91);
  for (std::size_t n = 1; n <= 300; ++n) {
    const ScoreTable t = IdTable(testing::RandomVector(rng, n));
    const GateConfig g = DeriveGate(t, "m", 75.0);
    const auto rank = static_cast<std::size_t>(std::ceil(0.75 * static_cast<double>(n)));
    EXPECT_EQ(ApplyGate(t, g).size(), n - (rank - 1)) << "n = " << n;
    EXPECT_EQ(g.derivation_set, "id_test");
    EXPECT_EQ(g.percentile, 75.0);
  }
}

TEST(Gate, ThresholdUsesOriginalIdRowsOnly) {
  ScoreTable t({"m"});
  t.AddRow({"a", Variant::kOriginal, Domain::kId, 0, 0, {1.0}});
  t.AddRow({"b", Variant::kOriginal, Domain::kId, 0, 0, {2.0}});
  t.AddRow({"c", Variant::kOriginal, Domain::kOod, 0, 0, {100.0}});
  t.AddRow({"c", Variant::kCounterfactual, Domain::kOod, 0, 0, {100.0}});
  EXPECT_EQ(DeriveGate(t, "m", 100.0).threshold, 2.0);
  const ScoreTable ood_only = t.Filter([](const ScoreRow& r) { return r.domain == Domain::kOod; });
  EXPECT_OODGATE_ERROR(DeriveGate(ood_only, "m", 75.0), ErrorCode::kEmptyScores);
}

TEST(Gate, KeepsRowsAtThreshold) {
  const ScoreTable t = IdTable({1.0, 2.0, 2.0, 3.0});
  const ScoreTable kept = ApplyGate(t, {"m", 2.0, 75.0, "id_test"});
  EXPECT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept.rows()[0].sample_id, "id_1");
}

TEST(Gate, DualGateIsIntersection) {
  CounterRng rng(92);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreTable t({"a", "b"});
    for (int i = 0; i < 40; ++i) {
      t.AddRow({"s" + std::to_string(i), Variant::kOriginal, i % 3 ? Domain::kId : Domain::kOod,
                0, 0, testing::RandomVector(rng, 2)});
    }
    const std::vector<GateConfig> gates = {DeriveGate(t, "a", 75.0), DeriveGate(t, "b", 50.0)};
    const ScoreTable both = DualGate(t, gates);
    std::set<std::string> first, second, joint;
    const ScoreTable kept_a = ApplyGate(t, gates[0]);
    const ScoreTable kept_b = ApplyGate(t, gates[1]);
    for (const auto& r : kept_a.rows()) first.insert(r.sample_id);
    for (const auto& r : kept_b.rows()) second.insert(r.sample_id);
    for (const auto& r : both.rows()) joint.insert(r.sample_id);
    std::set<std::string> expected;
    std::set_intersection(first.begin(), first.end(), second.begin(), second.end(),
                          std::inserter(expected, expected.begin()));
    EXPECT_EQ(joint, expected);
    const std::vector<GateConfig> reversed = {gates[1], gates[0]};
    EXPECT_EQ(DualGate(t, reversed), both);
  }
}

TEST(Categorise, TruthTable) {
  // (with artefact, without artefact, label)
  EXPECT_EQ(Categorise(1, 1, 1), ImpactCategory::kCorrectUnaffected);
  EXPECT_EQ(Categorise(0, 0, 1), ImpactCategory::kIncorrectUnaffected);
  EXPECT_EQ(Categorise(0, 2, 1), ImpactCategory::kIncorrectUnaffected);
  EXPECT_EQ(Categorise(1, 0, 1), ImpactCategory::kCorrectOnlyWithArtefact);
  EXPECT_EQ(Categorise(0, 1, 1), ImpactCategory::kCorrectOnlyWithoutArtefact);
  std::set<std::string_view> names;
  for (ImpactCategory c : kImpactCategories) names.insert(ImpactCategoryName(c));
  EXPECT_EQ(names.size(), 4u);
}

// Two ID rows and two OOD rows with counterfactuals covering all categories.
ScoreTable PanelTable() {
  ScoreTable t({"mahalanobis", "mcp"});
  t.AddRow({"id_0", Variant::kOriginal, Domain::kId, 0, 0, {-1.0, 0.9}});
  t.AddRow({"id_1", Variant::kOriginal, Domain::kId, 1, 0, {-2.0, 0.6}});
  t.AddRow({"id_2", Variant::kOriginal, Domain::kId, 1, 1, {-1.5, 0.8}});
  t.AddRow({"id_3", Variant::kOriginal, Domain::kId, 0, 0, {-0.5, 0.7}});
  const int preds[4][2] = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
  for (int i = 0; i < 4; ++i) {
    const std::string id = "ood_" + std::to_string(i);
    t.AddRow({id, Variant::kOriginal, Domain::kOod, 0, preds[i][0], {-3.0 + i, 0.95 - 0.1 * i}});
    t.AddRow({id, Variant::kCounterfactual, Domain::kOod, 0, preds[i][1], {-1.0, 0.5}});
  }
  t.Canonicalize();
  return t;
}

TEST(GatePanel, BaselineCountsEverything) {
  const GateSeedResult r = EvaluateGatePanel(PanelTable(), {"original", {}}, 75.0);
  EXPECT_EQ(r.id_total, 4u);
  EXPECT_EQ(r.ood_total, 4u);
  EXPECT_EQ(r.id_retained, 4u);
  EXPECT_EQ(r.ood_retained, 4u);
  EXPECT_EQ(r.retained_correct, 3u + 2u);
  EXPECT_EQ(r.categories, (std::array<std::size_t, 4>{1, 1, 1, 1}));
  EXPECT_EQ(r.id_retained_pct(), 100.0);
  EXPECT_NEAR(*r.retained_accuracy(), 5.0 / 8.0, 1e-15);
}

TEST(GatePanel, DualPanelMatchesManualIntersection) {
  const ScoreTable t = PanelTable();
  const GateSeedResult r = EvaluateGatePanel(t, {"combined", {"mahalanobis", "mcp"}}, 50.0);
  // Mahalanobis keeps id_0, id_2, id_3, ood_2, ood_3; MCP then drops ood_3.
  ASSERT_EQ(r.thresholds.size(), 2u);
  EXPECT_EQ(r.thresholds[0], -1.5);
  EXPECT_EQ(r.thresholds[1], 0.7);
  EXPECT_EQ(r.id_retained, 3u);
  EXPECT_EQ(r.ood_retained, 1u);
  EXPECT_EQ(r.retained_correct, 4u);
  EXPECT_EQ(r.categories, (std::array<std::size_t, 4>{0, 0, 1, 0}));
}

TEST(GatePanel, MissingCounterfactualIsAnError) {
  ScoreTable t({"m"});
  t.AddRow({"id_0", Variant::kOriginal, Domain::kId, 0, 0, {1.0}});
  t.AddRow({"ood_0", Variant::kOriginal, Domain::kOod, 0, 0, {1.0}});
  EXPECT_OODGATE_ERROR(EvaluateGatePanel(t, {"p", {}}, 75.0), ErrorCode::kSchemaMismatch);
}

TEST(Report, DeterministicJson) {
  const std::vector<ScoreTable> tables = {PanelTable(), PanelTable()};
  const std::vector<std::uint64_t> seeds = {0, 1};
  const std::vector<std::string> methods = {"mahalanobis", "mcp"};
  const std::vector<GatePanel> panels = DefaultGatePanels();
  const EvalReport a = BuildReport(seeds, tables, methods, panels);
  const EvalReport b = BuildReport(seeds, tables, methods, panels);
  EXPECT_EQ(ReportToJson(a), ReportToJson(b));
  ASSERT_EQ(a.methods.size(), 2u);
  EXPECT_EQ(a.methods[1].auroc_ood.per_seed.size(), 2u);
  EXPECT_EQ(a.gates.size(), 4u);
  EXPECT_NE(RenderReportTable(a).find("mahalanobis"), std::string::npos);
  EXPECT_OODGATE_ERROR(BuildReport(std::vector<std::uint64_t>{0}, tables, methods, panels),
                       ErrorCode::kSeedCountMismatch);
}

}  // namespace
}  // namespace oodgate
