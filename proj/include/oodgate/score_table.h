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

#ifndef OODGATE_SCORE_TABLE_H_
#define OODGATE_SCORE_TABLE_H_

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace oodgate {

enum class Variant { kOriginal, kCounterfactual };
enum class Domain { kId, kOod };

std::string_view VariantName(Variant v);
std::string_view DomainName(Domain d);

struct ScoreRow {
  std::string sample_id;
  Variant variant = Variant::kOriginal;
  Domain domain = Domain::kId;
  int true_label = 0;
  int predicted_label = 0;
  // Aligned with ScoreTable::methods(). Higher means more in-distribution.
  std::vector<double> scores;

  bool correct() const { return predicted_label == true_label; }

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

// Per-sample scores for a fixed, lexicographically ordered set of methods.
class ScoreTable {
 public:
  ScoreTable() = default;
  explicit ScoreTable(std::vector<std::string> methods);

  const std::vector<std::string>& methods() const { return methods_; }
  const std::vector<ScoreRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  bool HasMethod(std::string_view method) const;
  // Throws SchemaMismatch for an undeclared method.
  std::size_t Column(std::string_view method) const;
  double Score(std::size_t row, std::string_view method) const;

  // `row.scores` must already be aligned with methods().
  void AddRow(ScoreRow row);

  // Rows sorted by (sample_id, variant) with original before counterfactual.
  void Canonicalize();

  ScoreTable Filter(const std::function<bool(const ScoreRow&)>& keep) const;

  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;

 private:
  std::vector<std::string> methods_;
  std::vector<ScoreRow> rows_;
};

inline constexpr std::string_view kScoreTableFixedHeader =
    "sample_id,variant,domain,true_label,predicted_label";

// Writes a canonicalized copy; equal tables give byte-identical files.
void WriteScoreTable(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable ReadScoreTable(const std::filesystem::path& path);

std::string EncodeScoreTable(const ScoreTable& table);
ScoreTable DecodeScoreTable(std::string_view text);

// Shortest text that parses back to the identical double.
std::string FormatDouble(double v);
double ParseDouble(std::string_view text);

}  // namespace oodgate

#endif  // OODGATE_SCORE_TABLE_H_
