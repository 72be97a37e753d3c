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

#ifndef OODGATE_MANIFEST_H_
#define OODGATE_MANIFEST_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oodgate {

enum class Split { kTrain, kIdTest, kOodTest };

std::string_view SplitName(Split split);
Split ParseSplit(std::string_view text);

struct SampleRecord {
  std::string sample_id;
  Split split = Split::kTrain;
  int label = 0;
  bool has_artefact = false;
  // Artefact-removed twin; only artefact rows carry one.
  std::optional<std::string> counterfactual_id;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

// Throws InvariantViolation on a record that cannot exist.
void ValidateRecord(const SampleRecord& record);

struct DatasetManifest {
  std::vector<SampleRecord> records;

  std::vector<const SampleRecord*> WithSplit(Split split) const;
  const SampleRecord* Find(std::string_view sample_id) const;
  // Largest label + 1.
  int NumClasses() const;

  friend bool operator==(const DatasetManifest&,
                         const DatasetManifest&) = default;
};

inline constexpr std::string_view kManifestHeader =
    "sample_id,split,label,has_artefact,counterfactual_id";

// When `image_dir` is given, every counterfactual_id must name an existing
// `<image_dir>/<id>.npy`.
DatasetManifest ReadManifest(
    const std::filesystem::path& path,
    const std::optional<std::filesystem::path>& image_dir = std::nullopt);
void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

// Splits one CSV line on commas; strips a trailing carriage return.
std::vector<std::string> SplitCsvLine(std::string_view line);

}  // namespace oodgate

#endif  // OODGATE_MANIFEST_H_
