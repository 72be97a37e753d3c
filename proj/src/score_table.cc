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

#include "oodgate/score_table.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "oodgate/error.h"
#include "oodgate/manifest.h"

namespace oodgate {

std::string_view VariantName(Variant v) {
  return v == Variant::kOriginal ? "original" : "counterfactual";
}

std::string_view DomainName(Domain d) { return d == Domain::kId ? "ID" : "OOD"; }

ScoreTable::ScoreTable(std::vector<std::string> methods)
    : methods_(std::move(methods)) {
  std::sort(methods_.begin(), methods_.end());
  Require(std::adjacent_find(methods_.begin(), methods_.end()) == methods_.end(),
          ErrorCode::kSchemaMismatch, "duplicate method column");
  for (const std::string& m : methods_) {
    Require(!m.empty() && m.find(',') == std::string::npos,
            ErrorCode::kSchemaMismatch, "invalid method name '" + m + "'");
  }
}

bool ScoreTable::HasMethod(std::string_view method) const {
  return std::binary_search(methods_.begin(), methods_.end(), method);
}

std::size_t ScoreTable::Column(std::string_view method) const {
  auto it = std::lower_bound(methods_.begin(), methods_.end(), method);
  Require(it != methods_.end() && *it == method, ErrorCode::kSchemaMismatch,
          "no score column '" + std::string(method) + "'");
  return static_cast<std::size_t>(it - methods_.begin());
}

double ScoreTable::Score(std::size_t row, std::string_view method) const {
  return rows_[row].scores[Column(method)];
}

void ScoreTable::AddRow(ScoreRow row) {
  Require(row.scores.size() == methods_.size(), ErrorCode::kSchemaMismatch,
          row.sample_id + ": " + std::to_string(row.scores.size()) +
              " scores for " + std::to_string(methods_.size()) + " methods");
  Require(!row.sample_id.empty() && row.sample_id.find(',') == std::string::npos,
          ErrorCode::kSchemaMismatch, "invalid sample_id '" + row.sample_id + "'");
  rows_.push_back(std::move(row));
}

void ScoreTable::Canonicalize() {
  std::stable_sort(rows_.begin(), rows_.end(),
                   [](const ScoreRow& a, const ScoreRow& b) {
                     if (a.sample_id != b.sample_id) return a.sample_id < b.sample_id;
                     return a.variant < b.variant;
                   });
}

ScoreTable ScoreTable::Filter(
    const std::function<bool(const ScoreRow&)>& keep) const {
  ScoreTable out;
  out.methods_ = methods_;
  for (const ScoreRow& r : rows_) {
    if (keep(r)) out.rows_.push_back(r);
  }
  return out;
}

std::string FormatDouble(double v) {
  std::array<char, 64> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  Require(ec == std::errc(), ErrorCode::kIoFailure, "cannot format double");
  return std::string(buf.data(), ptr);
}

double ParseDouble(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  Require(ec == std::errc() && ptr == text.data() + text.size(),
          ErrorCode::kSchemaMismatch, "not a number: '" + std::string(text) + "'");
  return v;
}

std::string EncodeScoreTable(const ScoreTable& table) {
  ScoreTable sorted = table;
  sorted.Canonicalize();
  std::ostringstream out;
  out << kScoreTableFixedHeader;
  for (const std::string& m : sorted.methods()) out << ',' << m;
  out << '\n';
  for (const ScoreRow& r : sorted.rows()) {
    out << r.sample_id << ',' << VariantName(r.variant) << ','
        << DomainName(r.domain) << ',' << r.true_label << ',' << r.predicted_label;
    for (double s : r.scores) out << ',' << FormatDouble(s);
    out << '\n';
  }
  return out.str();
}

namespace {

int ParseLabel(const std::string& text) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  Require(ec == std::errc() && ptr == text.data() + text.size(),
          ErrorCode::kSchemaMismatch, "not a label: '" + text + "'");
  return v;
}

}  // namespace

ScoreTable DecodeScoreTable(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorCode::kSchemaMismatch,
          "score table without header");
  std::vector<std::string> header = SplitCsvLine(line);
  const std::vector<std::string> fixed = SplitCsvLine(kScoreTableFixedHeader);
  Require(header.size() >= fixed.size() &&
              std::equal(fixed.begin(), fixed.end(), header.begin()),
          ErrorCode::kSchemaMismatch, "unexpected score table header '" + line + "'");
  std::vector<std::string> methods(header.begin() + fixed.size(), header.end());
  Require(std::is_sorted(methods.begin(), methods.end()),
          ErrorCode::kSchemaMismatch, "method columns are not in canonical order");
  ScoreTable table(methods);

  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = SplitCsvLine(line);
    Require(f.size() == header.size(), ErrorCode::kSchemaMismatch,
            "row has " + std::to_string(f.size()) + " fields, header has " +
                std::to_string(header.size()));
    ScoreRow r;
    r.sample_id = f[0];
    if (f[1] == "original") {
      r.variant = Variant::kOriginal;
    } else if (f[1] == "counterfactual") {
      r.variant = Variant::kCounterfactual;
    } else {
      throw Error(ErrorCode::kSchemaMismatch, "unknown variant '" + f[1] + "'");
    }
    if (f[2] == "ID") {
      r.domain = Domain::kId;
    } else if (f[2] == "OOD") {
      r.domain = Domain::kOod;
    } else {
      throw Error(ErrorCode::kSchemaMismatch, "unknown domain '" + f[2] + "'");
    }
    r.true_label = ParseLabel(f[3]);
    r.predicted_label = ParseLabel(f[4]);
    for (std::size_t i = fixed.size(); i < f.size(); ++i) {
      r.scores.push_back(ParseDouble(f[i]));
    }
    table.AddRow(std::move(r));
  }
  return table;
}

void WriteScoreTable(const ScoreTable& table, const std::filesystem::path& path) {
  const std::string text = EncodeScoreTable(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorCode::kIoFailure, "cannot write " + path.string());
  out << text;
  Require(out.good(), ErrorCode::kIoFailure, "short write to " + path.string());
}

ScoreTable ReadScoreTable(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIoFailure, "cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return DecodeScoreTable(text);
}

}  // namespace oodgate
