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

#include "oodgate/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <string_view>

#include "json.hpp"
#include "oodgate/error.h"
#include "oodgate/npy.h"
#include "oodgate/parallel.h"
#include "oodgate/rng.h"

namespace oodgate {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kBlobStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kArtefactStream = 3;

void RequireImage(const Tensor& t, const char* what) {
  Require(t.rank() == 3 && t.shape()[2] == 1 && t.shape()[0] > 0 && t.shape()[1] > 0,
          ErrorCode::kShapeMismatch,
          std::string(what) + " must be [H, W, 1], got " + ShapeString(t.shape()));
}

bool InUnit(double v) { return v >= 0.0 && v <= 1.0; }

std::vector<std::uint8_t> MaskBits(const Tensor& mask) {
  std::vector<std::uint8_t> bits(mask.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = mask.at(i) != 0.0 ? 1 : 0;
  return bits;
}

Tensor MaskTensor(const std::vector<std::uint8_t>& bits, std::size_t h, std::size_t w) {
  std::vector<std::int64_t> v(bits.begin(), bits.end());
  return Tensor::FromInt64(Shape{h, w, 1}, std::move(v));
}

// Every pixel the ruler of these params can cover, over all tick phases.
PixelBox RulerExtent(const ArtefactParams& a, std::size_t width) {
  const std::size_t line_rows = (a.num_lines - 1) * a.line_spacing + a.line_width;
  return {a.band_top, a.band_top + std::max(line_rows, a.tick_length), 0, width};
}

bool Intersects(const PixelBox& a, const PixelBox& b) {
  return a.row0 < b.row1 && b.row0 < a.row1 && a.col0 < b.col1 && b.col0 < a.col1;
}

std::vector<PixelBox> ArtefactExtents(const SyntheticSpec& s) {
  const ArtefactParams& a = s.artefact;
  if (a.kind == ArtefactKind::kRulerLines) return {RulerExtent(a, s.width)};
  const std::size_t lo = a.margin, size = a.mark_size;
  return {{lo, lo + size, lo, lo + size},
          {lo, lo + size, s.width - lo - size, s.width - lo},
          {s.height - lo - size, s.height - lo, lo, lo + size},
          {s.height - lo - size, s.height - lo, s.width - lo - size, s.width - lo}};
}

}  // namespace

std::string_view ArtefactKindName(ArtefactKind kind) {
  return kind == ArtefactKind::kRulerLines ? "ruler_lines" : "corner_annotation";
}

ArtefactKind ParseArtefactKind(std::string_view text) {
  if (text == "ruler_lines") return ArtefactKind::kRulerLines;
  if (text == "corner_annotation") return ArtefactKind::kCornerAnnotation;
  throw Error(ErrorCode::kInvalidSpec, "unknown artefact kind '" + std::string(text) + "'");
}

PixelBox BlobSupportBox(const SyntheticSpec& spec) {
  const BlobParams& b = spec.blob;
  const double reach = b.support_sigmas * b.sigma_max;
  const auto lo = [](double v) { return static_cast<std::size_t>(std::max(0.0, std::floor(v))); };
  const auto hi = [](double v, std::size_t limit) {
    return std::min(limit, static_cast<std::size_t>(std::max(0.0, std::floor(v) + 1.0)));
  };
  return {lo(b.center_row_min - reach), hi(b.center_row_max + reach, spec.height),
          lo(b.center_col_min - reach), hi(b.center_col_max + reach, spec.width)};
}

void SyntheticSpec::Validate() const {
  const auto bad = [](bool cond, const std::string& msg) {
    Require(!cond, ErrorCode::kInvalidSpec, msg);
  };
  bad(height < 4 || width < 4, "image must be at least 4x4");
  bad(num_classes < 2, "need at least two classes");
  bad(train_per_class == 0 || id_test_per_class == 0 || ood_test_per_class == 0,
      "every split needs a positive count");
  bad(!InUnit(rho), "rho must lie in [0, 1]");
  bad(!InUnit(background), "background must lie in [0, 1]");
  bad(!(noise_sigma >= 0.0), "noise sigma must be >= 0");
  bad(!(feather_sigma >= 0.0), "feather sigma must be >= 0");
  bad(blob.class_intensity.size() != static_cast<std::size_t>(num_classes),
      "one blob intensity per class required");
  for (double v : blob.class_intensity) {
    bad(!InUnit(v) || !InUnit(v - blob.intensity_jitter) || !InUnit(v + blob.intensity_jitter),
        "blob intensities (with jitter) must lie in [0, 1]");
  }
  bad(!(blob.sigma_min > 0.0) || blob.sigma_max < blob.sigma_min, "invalid blob sigma range");
  bad(!(blob.support_sigmas > 0.0), "blob support must be positive");
  bad(blob.center_row_min < 0.0 || blob.center_row_max > static_cast<double>(height - 1) ||
          blob.center_col_min < 0.0 || blob.center_col_max > static_cast<double>(width - 1) ||
          blob.center_row_max < blob.center_row_min || blob.center_col_max < blob.center_col_min,
      "blob centre region must lie inside the image");
  bad(!InUnit(artefact.intensity), "artefact intensity must lie in [0, 1]");
  if (artefact.kind == ArtefactKind::kRulerLines) {
    bad(artefact.num_lines == 0 || artefact.line_width == 0 || artefact.line_spacing == 0 ||
            artefact.tick_spacing == 0,
        "ruler needs lines, width, spacing and tick spacing");
    bad(artefact.num_lines > 1 && artefact.line_spacing < artefact.line_width,
        "ruler lines overlap");
    bad(RulerExtent(artefact, width).row1 > height, "ruler does not fit the image");
  } else {
    bad(artefact.mark_size < 3, "annotation mark must be at least 3 pixels");
    bad(2 * (artefact.mark_size + artefact.margin) > std::min(height, width),
        "annotation marks do not fit the image");
  }
  const PixelBox blob_box = BlobSupportBox(*this);
  for (const PixelBox& e : ArtefactExtents(*this)) {
    Require(!Intersects(e, blob_box), ErrorCode::kArtefactOverlapsSignal,
            "artefact region reaches the class-signal support");
  }
}

std::vector<std::size_t> SyntheticSpec::ClassCounts(Split split) const {
  const auto k = static_cast<std::size_t>(num_classes);
  if (split == Split::kTrain) return std::vector<std::size_t>(k, train_per_class);
  if (split == Split::kIdTest) return std::vector<std::size_t>(k, id_test_per_class);
  const std::size_t total = ood_test_per_class * k;
  const auto first = static_cast<std::size_t>(std::llround(rho * static_cast<double>(total)));
  std::vector<std::size_t> counts(k, 0);
  counts[0] = first;
  const std::size_t rest = total - first;
  for (std::size_t y = 1; y < k; ++y) {
    counts[y] = rest / (k - 1) + ((y - 1) < rest % (k - 1) ? 1 : 0);
  }
  return counts;
}

Tensor RenderCleanImage(const SyntheticSpec& spec, int label, std::uint64_t seed) {
  Require(label >= 0 && label < spec.num_classes, ErrorCode::kInvalidSpec, "label out of range");
  const BlobParams& b = spec.blob;
  CounterRng blob_rng(DeriveStream(seed, kBlobStream));
  const double cr = blob_rng.Uniform(b.center_row_min, b.center_row_max);
  const double cc = blob_rng.Uniform(b.center_col_min, b.center_col_max);
  const double sigma = blob_rng.Uniform(b.sigma_min, b.sigma_max);
  const double amp = b.class_intensity[static_cast<std::size_t>(label)] +
                     blob_rng.Uniform(-b.intensity_jitter, b.intensity_jitter);
  const double reach2 = b.support_sigmas * sigma * b.support_sigmas * sigma;

  CounterRng noise(DeriveStream(seed, kNoiseStream));
  std::vector<double> px(spec.height * spec.width);
  for (std::size_t r = 0; r < spec.height; ++r) {
    for (std::size_t c = 0; c < spec.width; ++c) {
      const double dr = static_cast<double>(r) - cr;
      const double dc = static_cast<double>(c) - cc;
      const double d2 = dr * dr + dc * dc;
      double v = spec.background;
      if (d2 <= reach2) v += amp * std::exp(-d2 / (2.0 * sigma * sigma));
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.Normal();
      px[r * spec.width + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return Tensor(Shape{spec.height, spec.width, 1}, std::move(px), DType::kFloat32);
}

InjectedArtefact InjectArtefact(const Tensor& image, const ArtefactParams& params,
                                std::uint64_t seed, const std::optional<PixelBox>& protected_box) {
  RequireImage(image, "image");
  Require(InUnit(params.intensity), ErrorCode::kInvalidSpec, "artefact intensity outside [0, 1]");
  const std::size_t h = image.shape()[0];
  const std::size_t w = image.shape()[1];
  CounterRng rng(DeriveStream(seed, kArtefactStream));
  std::vector<std::uint8_t> bits(h * w, 0);
  const auto mark = [&](std::size_t r, std::size_t c) {
    Require(r < h && c < w, ErrorCode::kOutOfBounds, "artefact leaves the image");
    bits[r * w + c] = 1;
  };

  if (params.kind == ArtefactKind::kRulerLines) {
    const std::size_t phase = rng.Below(params.tick_spacing);
    for (std::size_t l = 0; l < params.num_lines; ++l) {
      for (std::size_t k = 0; k < params.line_width; ++k) {
        for (std::size_t c = 0; c < w; ++c) mark(params.band_top + l * params.line_spacing + k, c);
      }
    }
    for (std::size_t c = phase; c < w; c += params.tick_spacing) {
      for (std::size_t k = 0; k < params.tick_length; ++k) mark(params.band_top + k, c);
    }
  } else {
    const std::size_t corner = rng.Below(4);
    const std::size_t s = params.mark_size;
    Require(2 * (s + params.margin) <= std::min(h, w), ErrorCode::kOutOfBounds,
            "annotation mark does not fit the image");
    const std::size_t r0 = corner < 2 ? params.margin : h - params.margin - s;
    const std::size_t c0 = corner % 2 == 0 ? params.margin : w - params.margin - s;
    for (std::size_t i = 0; i < s; ++i) {
      mark(r0, c0 + i);
      mark(r0 + s - 1, c0 + i);
      mark(r0 + i, c0);
      mark(r0 + i, c0 + s - 1);
      mark(r0 + i, c0 + s / 2);
    }
  }

  std::vector<double> px = image.ToDoubles();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    if (protected_box) {
      Require(!protected_box->Contains(i / w, i % w), ErrorCode::kArtefactOverlapsSignal,
              "artefact pixel inside the class-signal region");
    }
    px[i] = std::min(1.0, px[i] + params.intensity);
  }
  return {Tensor(image.shape(), std::move(px), image.dtype()), MaskTensor(bits, h, w)};
}

Offset FindSourceOffset(const Tensor& mask) {
  RequireImage(mask, "mask");
  const auto h = static_cast<int>(mask.shape()[0]);
  const auto w = static_cast<int>(mask.shape()[1]);
  const std::vector<std::uint8_t> bits = MaskBits(mask);
  const auto fits = [&](Offset o) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (!bits[static_cast<std::size_t>(r * w + c)]) continue;
        const int sr = r + o.rows, sc = c + o.cols;
        if (sr < 0 || sr >= h || sc < 0 || sc >= w) return false;
        if (bits[static_cast<std::size_t>(sr * w + sc)]) return false;
      }
    }
    return true;
  };
  for (int d = 1; d < std::max(h, w); ++d) {
    for (Offset o : {Offset{-d, 0}, Offset{d, 0}, Offset{0, -d}, Offset{0, d}}) {
      if (fits(o)) return o;
    }
  }
  throw Error(ErrorCode::kSourceOverlapsMask, "no axis-aligned source region avoids the mask");
}

namespace {

// Squared distance from every pixel to the nearest mask pixel (0 inside).
std::vector<double> MaskDistance2(const std::vector<std::uint8_t>& bits, std::size_t h,
                                  std::size_t w, double limit2) {
  std::vector<double> d2(h * w, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> on;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) on.push_back(i);
  }
  for (std::size_t i = 0; i < d2.size(); ++i) {
    if (bits[i]) {
      d2[i] = 0.0;
      continue;
    }
    const auto r = static_cast<double>(i / w), c = static_cast<double>(i % w);
    for (std::size_t j : on) {
      const double dr = r - static_cast<double>(j / w);
      const double dc = c - static_cast<double>(j % w);
      d2[i] = std::min(d2[i], dr * dr + dc * dc);
    }
    if (d2[i] > limit2) d2[i] = std::numeric_limits<double>::infinity();
  }
  return d2;
}

void CheckSource(const std::vector<std::uint8_t>& bits, std::size_t h, std::size_t w, Offset o) {
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    const long sr = static_cast<long>(i / w) + o.rows;
    const long sc = static_cast<long>(i % w) + o.cols;
    Require(sr >= 0 && sc >= 0 && sr < static_cast<long>(h) && sc < static_cast<long>(w),
            ErrorCode::kOutOfBounds, "shifted mask leaves the image");
    Require(!bits[static_cast<std::size_t>(sr) * w + static_cast<std::size_t>(sc)],
            ErrorCode::kSourceOverlapsMask, "shifted mask intersects the mask");
  }
}

// Feather weight per pixel, 0 where the pixel keeps its value.
std::vector<double> FeatherWeights(const std::vector<std::uint8_t>& bits, std::size_t h,
                                   std::size_t w, Offset o, double sigma) {
  std::vector<double> weight(h * w, 0.0);
  if (!(sigma > 0.0)) return weight;
  const double limit = 3.0 * sigma;
  const std::vector<double> d2 = MaskDistance2(bits, h, w, limit * limit);
  for (std::size_t i = 0; i < weight.size(); ++i) {
    if (bits[i] || !std::isfinite(d2[i])) continue;
    const long sr = static_cast<long>(i / w) + o.rows;
    const long sc = static_cast<long>(i % w) + o.cols;
    if (sr < 0 || sc < 0 || sr >= static_cast<long>(h) || sc >= static_cast<long>(w)) continue;
    if (bits[static_cast<std::size_t>(sr) * w + static_cast<std::size_t>(sc)]) continue;
    weight[i] = std::exp(-d2[i] / (2.0 * sigma * sigma));
  }
  return weight;
}

}  // namespace

Tensor RemoveArtefact(const Tensor& image, const Tensor& mask, Offset source_offset,
                      double feather_sigma) {
  RequireImage(image, "image");
  Require(mask.shape() == image.shape(), ErrorCode::kShapeMismatch,
          "mask shape differs from the image");
  Require(feather_sigma >= 0.0, ErrorCode::kInvalidConfig, "feather sigma must be >= 0");
  const std::size_t h = image.shape()[0];
  const std::size_t w = image.shape()[1];
  const std::vector<std::uint8_t> bits = MaskBits(mask);
  CheckSource(bits, h, w, source_offset);
  const std::vector<double> weight = FeatherWeights(bits, h, w, source_offset, feather_sigma);

  const std::vector<double> src = image.ToDoubles();
  std::vector<double> out = src;
  const long shift = static_cast<long>(source_offset.rows) * static_cast<long>(w) +
                     source_offset.cols;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto j = static_cast<std::size_t>(static_cast<long>(i) + shift);
    if (bits[i]) {
      out[i] = src[j];
    } else if (weight[i] > 0.0) {
      out[i] = weight[i] * src[j] + (1.0 - weight[i]) * src[i];
    }
  }
  return Tensor(image.shape(), std::move(out), image.dtype());
}

Tensor FeatherBand(const Tensor& mask, Offset source_offset, double feather_sigma) {
  RequireImage(mask, "mask");
  const std::size_t h = mask.shape()[0];
  const std::size_t w = mask.shape()[1];
  const std::vector<std::uint8_t> bits = MaskBits(mask);
  const std::vector<double> weight = FeatherWeights(bits, h, w, source_offset, feather_sigma);
  std::vector<std::uint8_t> band(h * w, 0);
  for (std::size_t i = 0; i < band.size(); ++i) band[i] = weight[i] > 0.0 ? 1 : 0;
  return MaskTensor(band, h, w);
}

SyntheticDataset GenerateDataset(const SyntheticSpec& spec) {
  spec.Validate();
  struct Job {
    SampleRecord record;
  };
  std::vector<Job> jobs;
  const std::pair<Split, const char*> splits[] = {
      {Split::kTrain, "train"}, {Split::kIdTest, "id"}, {Split::kOodTest, "ood"}};
  for (const auto& [split, prefix] : splits) {
    const std::vector<std::size_t> counts = spec.ClassCounts(split);
    std::size_t n = 0;
    for (std::size_t y = 0; y < counts.size(); ++y) {
      for (std::size_t i = 0; i < counts[y]; ++i, ++n) {
        char id[32];
        std::snprintf(id, sizeof id, "%s_%05zu", prefix, n);
        SampleRecord rec;
        rec.sample_id = id;
        rec.split = split;
        rec.label = static_cast<int>(y);
        if (split == Split::kOodTest) {
          rec.has_artefact = true;
          rec.counterfactual_id = rec.sample_id + "_cf";
        }
        jobs.push_back({std::move(rec)});
      }
    }
  }

  const PixelBox signal = BlobSupportBox(spec);
  std::vector<Tensor> images(jobs.size()), masks(jobs.size()), counterfactuals(jobs.size());
  ParallelFor(jobs.size(), [&](std::size_t i) {
    const SampleRecord& rec = jobs[i].record;
    const std::uint64_t key = DeriveStream(spec.seed, HashString(rec.sample_id));
    Tensor clean = RenderCleanImage(spec, rec.label, key);
    if (!rec.has_artefact) {
      images[i] = std::move(clean);
      return;
    }
    InjectedArtefact injected = InjectArtefact(clean, spec.artefact, key, signal);
    const Offset offset = FindSourceOffset(injected.mask);
    counterfactuals[i] =
        RemoveArtefact(injected.image, injected.mask, offset, spec.feather_sigma);
    images[i] = std::move(injected.image);
    masks[i] = std::move(injected.mask);
  });

  SyntheticDataset ds;
  ds.spec = spec;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    SampleRecord& rec = jobs[i].record;
    ValidateRecord(rec);
    ds.images.emplace(rec.sample_id, std::move(images[i]));
    if (rec.has_artefact) {
      ds.masks.emplace(rec.sample_id, std::move(masks[i]));
      ds.images.emplace(*rec.counterfactual_id, std::move(counterfactuals[i]));
    }
    ds.manifest.records.push_back(std::move(rec));
  }
  return ds;
}

std::string SyntheticSpecToJson(const SyntheticSpec& s) {
  Json j;
  j["height"] = s.height;
  j["width"] = s.width;
  j["num_classes"] = s.num_classes;
  j["background"] = s.background;
  j["noise_sigma"] = s.noise_sigma;
  Json b;
  b["center_row_min"] = s.blob.center_row_min;
  b["center_row_max"] = s.blob.center_row_max;
  b["center_col_min"] = s.blob.center_col_min;
  b["center_col_max"] = s.blob.center_col_max;
  b["sigma_min"] = s.blob.sigma_min;
  b["sigma_max"] = s.blob.sigma_max;
  b["class_intensity"] = s.blob.class_intensity;
  b["intensity_jitter"] = s.blob.intensity_jitter;
  b["support_sigmas"] = s.blob.support_sigmas;
  j["blob"] = std::move(b);
  Json a;
  a["kind"] = ArtefactKindName(s.artefact.kind);
  a["intensity"] = s.artefact.intensity;
  a["band_top"] = s.artefact.band_top;
  a["num_lines"] = s.artefact.num_lines;
  a["line_spacing"] = s.artefact.line_spacing;
  a["line_width"] = s.artefact.line_width;
  a["tick_spacing"] = s.artefact.tick_spacing;
  a["tick_length"] = s.artefact.tick_length;
  a["mark_size"] = s.artefact.mark_size;
  a["margin"] = s.artefact.margin;
  j["artefact"] = std::move(a);
  j["train_per_class"] = s.train_per_class;
  j["id_test_per_class"] = s.id_test_per_class;
  j["ood_test_per_class"] = s.ood_test_per_class;
  j["rho"] = s.rho;
  j["feather_sigma"] = s.feather_sigma;
  j["seed"] = s.seed;
  return j.dump(2) + "\n";
}

namespace {

void CheckKeys(const Json& j, std::initializer_list<std::string_view> allowed,
               std::string_view where) {
  Require(j.is_object(), ErrorCode::kInvalidSpec, std::string(where) + " must be an object");
  for (const auto& item : j.items()) {
    const bool known = std::find(allowed.begin(), allowed.end(), item.key()) != allowed.end();
    Require(known, ErrorCode::kInvalidSpec,
            "unknown key '" + item.key() + "' in " + std::string(where));
  }
}

}  // namespace

SyntheticSpec SyntheticSpecFromJson(std::string_view text) {
  SyntheticSpec s;
  try {
    const Json j = Json::parse(text);
    CheckKeys(j,
              {"height", "width", "num_classes", "background", "noise_sigma", "blob", "artefact",
               "train_per_class", "id_test_per_class", "ood_test_per_class", "rho",
               "feather_sigma", "seed"},
              "synthetic spec");
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.background = j.value("background", s.background);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    if (j.contains("blob")) {
      const Json& b = j["blob"];
      CheckKeys(b,
                {"center_row_min", "center_row_max", "center_col_min", "center_col_max",
                 "sigma_min", "sigma_max", "class_intensity", "intensity_jitter",
                 "support_sigmas"},
                "blob");
      s.blob.center_row_min = b.value("center_row_min", s.blob.center_row_min);
      s.blob.center_row_max = b.value("center_row_max", s.blob.center_row_max);
      s.blob.center_col_min = b.value("center_col_min", s.blob.center_col_min);
      s.blob.center_col_max = b.value("center_col_max", s.blob.center_col_max);
      s.blob.sigma_min = b.value("sigma_min", s.blob.sigma_min);
      s.blob.sigma_max = b.value("sigma_max", s.blob.sigma_max);
      s.blob.class_intensity = b.value("class_intensity", s.blob.class_intensity);
      s.blob.intensity_jitter = b.value("intensity_jitter", s.blob.intensity_jitter);
      s.blob.support_sigmas = b.value("support_sigmas", s.blob.support_sigmas);
    }
    if (j.contains("artefact")) {
      const Json& a = j["artefact"];
      CheckKeys(a,
                {"kind", "intensity", "band_top", "num_lines", "line_spacing", "line_width",
                 "tick_spacing", "tick_length", "mark_size", "margin"},
                "artefact");
      if (a.contains("kind")) s.artefact.kind = ParseArtefactKind(a["kind"].get<std::string>());
      s.artefact.intensity = a.value("intensity", s.artefact.intensity);
      s.artefact.band_top = a.value("band_top", s.artefact.band_top);
      s.artefact.num_lines = a.value("num_lines", s.artefact.num_lines);
      s.artefact.line_spacing = a.value("line_spacing", s.artefact.line_spacing);
      s.artefact.line_width = a.value("line_width", s.artefact.line_width);
      s.artefact.tick_spacing = a.value("tick_spacing", s.artefact.tick_spacing);
      s.artefact.tick_length = a.value("tick_length", s.artefact.tick_length);
      s.artefact.mark_size = a.value("mark_size", s.artefact.mark_size);
      s.artefact.margin = a.value("margin", s.artefact.margin);
    }
    s.train_per_class = j.value("train_per_class", s.train_per_class);
    s.id_test_per_class = j.value("id_test_per_class", s.id_test_per_class);
    s.ood_test_per_class = j.value("ood_test_per_class", s.ood_test_per_class);
    s.rho = j.value("rho", s.rho);
    s.feather_sigma = j.value("feather_sigma", s.feather_sigma);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("synthetic spec: ") + e.what());
  }
  return s;
}

void WriteDataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  for (const auto& [id, image] : ds.images) WriteArrayFile(image, dir / "images" / (id + ".npy"));
  for (const auto& [id, mask] : ds.masks) WriteArrayFile(mask, dir / "masks" / (id + ".npy"));
  WriteManifest(ds.manifest, dir / "manifest.csv");
  std::ofstream out(dir / "spec.json", std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorCode::kIoFailure, "cannot write " + (dir / "spec.json").string());
  out << SyntheticSpecToJson(ds.spec);
}

}  // namespace oodgate
