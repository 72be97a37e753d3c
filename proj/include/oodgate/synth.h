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

// Synthetic counterfactual artefact benchmark. Images are [H, W, 1]
// float32 in [0, 1]; masks are [H, W, 1] int64 with 1 at artefact pixels.

#ifndef OODGATE_SYNTH_H_
#define OODGATE_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oodgate/manifest.h"
#include "oodgate/tensor.h"

namespace oodgate {

// Class signal: one Gaussian blob added to the background. The blob
// amplitude encodes the class.
struct BlobParams {
  double center_row_min = 7.0;
  double center_row_max = 12.0;
  double center_col_min = 11.0;
  double center_col_max = 16.0;
  double sigma_min = 2.5;
  double sigma_max = 3.0;
  // Amplitude per class; jitter is uniform in [-j, j].
  std::vector<double> class_intensity = {0.7, 0.45};
  double intensity_jitter = 0.15;
  // Blob pixels farther than this many sigmas from the center stay untouched.
  double support_sigmas = 2.5;
};

enum class ArtefactKind { kRulerLines, kCornerAnnotation };

std::string_view ArtefactKindName(ArtefactKind kind);
ArtefactKind ParseArtefactKind(std::string_view text);

struct ArtefactParams {
  ArtefactKind kind = ArtefactKind::kRulerLines;
  // Added to the covered pixels, then clipped to 1.
  double intensity = 0.5;
  // Ruler: horizontal lines starting at `band_top`, `line_spacing` apart,
  // with vertical ticks of `tick_length` rows every `tick_spacing` columns.
  // The tick phase is drawn from the seed.
  std::size_t band_top = 23;
  std::size_t num_lines = 2;
  std::size_t line_spacing = 3;
  std::size_t line_width = 1;
  std::size_t tick_spacing = 4;
  std::size_t tick_length = 3;
  // Annotation: a hollow square glyph with a centre stroke, `mark_size`
  // pixels wide, `margin` pixels from a corner drawn from the seed.
  std::size_t mark_size = 5;
  std::size_t margin = 1;
};

struct SyntheticSpec {
  std::size_t height = 28;
  std::size_t width = 28;
  int num_classes = 2;
  double background = 0.2;
  double noise_sigma = 0.05;
  BlobParams blob;
  ArtefactParams artefact;
  std::size_t train_per_class = 200;
  std::size_t id_test_per_class = 100;
  // The OOD split holds ood_test_per_class * K images; a fraction rho of
  // them belongs to class 0 and the rest is split evenly.
  std::size_t ood_test_per_class = 100;
  double rho = 0.8;
  double feather_sigma = 1.5;
  std::uint64_t seed = 0;

  // Throws InvalidSpec, or ArtefactOverlapsSignal when the artefact region
  // can reach the blob support.
  void Validate() const;
  // Per-split class counts in label order.
  std::vector<std::size_t> ClassCounts(Split split) const;
};

std::string SyntheticSpecToJson(const SyntheticSpec& spec);
SyntheticSpec SyntheticSpecFromJson(std::string_view text);

// Pixel box [row0, row1) x [col0, col1).
struct PixelBox {
  std::size_t row0 = 0, row1 = 0, col0 = 0, col1 = 0;
  bool Contains(std::size_t r, std::size_t c) const {
    return r >= row0 && r < row1 && c >= col0 && c < col1;
  }
};

// Every pixel any blob of this spec can touch.
PixelBox BlobSupportBox(const SyntheticSpec& spec);

// Artefact-free image of class `label`.
Tensor RenderCleanImage(const SyntheticSpec& spec, int label, std::uint64_t seed);

struct InjectedArtefact {
  Tensor image;
  Tensor mask;
};

// Pixels outside the mask are copied unchanged. `protected_box`, when given,
// must not intersect the mask (ArtefactOverlapsSignal).
InjectedArtefact InjectArtefact(const Tensor& image, const ArtefactParams& params,
                                std::uint64_t seed,
                                const std::optional<PixelBox>& protected_box = std::nullopt);

struct Offset {
  int rows = 0;
  int cols = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

// Smallest axis-aligned translation keeping the shifted mask inside the image
// and disjoint from the mask. Ties resolve up, down, left, right.
Offset FindSourceOffset(const Tensor& mask);

// Masked pixels take the value at pos + offset. Outside the mask, pixels
// within 3 sigma of it blend toward the shifted content with weight
// exp(-d^2 / (2 sigma^2)). Throws OutOfBounds or SourceOverlapsMask.
Tensor RemoveArtefact(const Tensor& image, const Tensor& mask, Offset source_offset,
                      double feather_sigma);

// Pixels of the feather band: outside the mask, within 3 sigma of it, with an
// in-bounds source outside the mask.
Tensor FeatherBand(const Tensor& mask, Offset source_offset, double feather_sigma);

struct SyntheticDataset {
  SyntheticSpec spec;
  DatasetManifest manifest;
  // Keyed by sample id; counterfactuals are keyed by their own id.
  std::map<std::string, Tensor> images;
  // OOD rows only.
  std::map<std::string, Tensor> masks;
};

SyntheticDataset GenerateDataset(const SyntheticSpec& spec);

// images/<id>.npy, masks/<id>.npy, manifest.csv and spec.json.
void WriteDataset(const SyntheticDataset& dataset, const std::filesystem::path& dir);

}  // namespace oodgate

#endif  // OODGATE_SYNTH_H_
