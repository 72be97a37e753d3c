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

#include "oodgate/manifest.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "oodgate/error.h"

namespace oodgate {

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kIdTest: return "id_test";
    case Split::kOodTest: return "ood_test";
  }
  return "";
}

Split ParseSplit(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "id_test") return Split::kIdTest;
  if (text == "ood_test") return Split::kOodTest;
  throw Error(ErrorCode::kSchemaMismatch,
              "unknown split '" + std::string(text) + "'");
}

void ValidateRecord(const SampleRecord& record) {
  Require(!record.sample_id.empty(), ErrorCode::kInvariantViolation,
          "empty sample_id");
  Require(record.label >= 0, ErrorCode::kInvariantViolation,
          record.sample_id + ": negative label");
  Require(!(record.split == Split::kTrain && record.has_artefact),
          ErrorCode::kInvariantViolation,
          record.sample_id + ": training rows must be artefact-free");
  Require(!record.counterfactual_id.has_value() || record.has_artefact,
          ErrorCode::kInvariantViolation,
          record.sample_id + ": counterfactual_id without artefact");
  Require(!record.counterfactual_id.has_value() ||
              !record.counterfactual_id->empty(),
          ErrorCode::kInvariantViolation,
          record.sample_id + ": empty counterfactual_id");
}

std::vector<const SampleRecord*> DatasetManifest::WithSplit(Split split) const {
  std::vector<const SampleRecord*> out;
  for (const SampleRecord& r : records) {
    if (r.split == split) out.push_back(&r);
  }
  return out;
}

const SampleRecord* DatasetManifest::Find(std::string_view sample_id) const {
  for (const SampleRecord& r : records) {
    if (r.sample_id == sample_id) return &r;
  }
  return nullptr;
}

int DatasetManifest::NumClasses() const {
  int k = 0;
  for (const SampleRecord& r : records) k = std::max(k, r.label + 1);
  return k;
}

std::vector<std::string> SplitCsvLine(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

namespace {

int ParseInt(const std::string& text, const std::string& what) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  Require(ec == std::errc() && ptr == text.data() + text.size(),
          ErrorCode::kSchemaMismatch, what + " is not an integer: '" + text + "'");
  return value;
}

}  // namespace

DatasetManifest ReadManifest(const std::filesystem::path& path,
                             const std::optional<std::filesystem::path>& image_dir) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kIoFailure, "cannot open " + path.string());
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorCode::kSchemaMismatch,
          path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Require(line == kManifestHeader, ErrorCode::kSchemaMismatch,
          path.string() + ": unexpected header '" + line + "'");

  DatasetManifest manifest;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = SplitCsvLine(line);
    Require(f.size() == 5, ErrorCode::kSchemaMismatch,
            path.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
    SampleRecord r;
    r.sample_id = f[0];
    r.split = ParseSplit(f[1]);
    r.label = ParseInt(f[2], "label");
    Require(f[3] == "0" || f[3] == "1", ErrorCode::kSchemaMismatch,
            "has_artefact must be 0 or 1, got '" + f[3] + "'");
    r.has_artefact = f[3] == "1";
    if (!f[4].empty()) r.counterfactual_id = f[4];
    ValidateRecord(r);
    if (image_dir.has_value() && r.counterfactual_id.has_value()) {
      Require(std::filesystem::exists(*image_dir / (*r.counterfactual_id + ".npy")),
              ErrorCode::kInvariantViolation,
              r.sample_id + ": counterfactual image " + *r.counterfactual_id +
                  " does not exist");
    }
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const SampleRecord& r : manifest.records) {
    ValidateRecord(r);
    out << r.sample_id << ',' << SplitName(r.split) << ',' << r.label << ','
        << (r.has_artefact ? 1 : 0) << ',' << r.counterfactual_id.value_or("")
        << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  Require(file.good(), ErrorCode::kIoFailure, "cannot write " + path.string());
  file << out.str();
}

}  // namespace oodgate
