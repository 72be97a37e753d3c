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

#include <cmath>
#include <vector>

#include "oodgate/npy.h"
#include "oodgate/synth.h"
#include "test_util.h"

namespace oodgate {
namespace {

using testing::TempDir;

SyntheticSpec SmallSpec() {
  SyntheticSpec s;
  s.train_per_class = 12;
  s.id_test_per_class = 6;
  s.ood_test_per_class = 5;
  s.seed = 3;
  return s;
}

Tensor Flat(double v, std::size_t h = 28, std::size_t w = 28) {
  return Tensor(Shape{h, w, 1}, std::vector<double>(h * w, v), DType::kFloat32);
}

bool MaskAt(const Tensor& mask, std::size_t r, std::size_t c) {
  return mask.int_values()[r * mask.shape()[1] + c] != 0;
}

TEST(SyntheticSpec, DefaultsAreValid) {
  EXPECT_NO_THROW(SyntheticSpec{}.Validate());
  const SyntheticSpec s;
  EXPECT_EQ(s.ClassCounts(Split::kTrain), (std::vector<std::size_t>{200, 200}));
  EXPECT_EQ(s.ClassCounts(Split::kOodTest), (std::vector<std::size_t>{160, 40}));
}

TEST(SyntheticSpec, RejectsInvalidValues) {
  SyntheticSpec s;
  s.train_per_class = 0;
  EXPECT_OODGATE_ERROR(s.Validate(), ErrorCode::kInvalidSpec);
  s = SyntheticSpec{};
  s.blob.class_intensity = {1.2, 0.4};
  EXPECT_OODGATE_ERROR(s.Validate(), ErrorCode::kInvalidSpec);
  s = SyntheticSpec{};
  s.rho = 1.5;
  EXPECT_OODGATE_ERROR(s.Validate(), ErrorCode::kInvalidSpec);
  s = SyntheticSpec{};
  s.blob.class_intensity = {0.7};
  EXPECT_OODGATE_ERROR(s.Validate(), ErrorCode::kInvalidSpec);
  s = SyntheticSpec{};
  s.artefact.band_top = 12;
  EXPECT_OODGATE_ERROR(s.Validate(), ErrorCode::kArtefactOverlapsSignal);
  s = SyntheticSpec{};
  s.artefact.kind = ArtefactKind::kCornerAnnotation;
  EXPECT_OODGATE_ERROR(s.Validate(), ErrorCode::kArtefactOverlapsSignal);
  EXPECT_OODGATE_ERROR(GenerateDataset(s), ErrorCode::kArtefactOverlapsSignal);
}

TEST(SyntheticSpec, JsonRoundTrip) {
  SyntheticSpec s = SmallSpec();
  s.artefact.kind = ArtefactKind::kCornerAnnotation;
  s.rho = 0.65;
  const std::string json = SyntheticSpecToJson(s);
  EXPECT_EQ(SyntheticSpecToJson(SyntheticSpecFromJson(json)), json);
  EXPECT_OODGATE_ERROR(SyntheticSpecFromJson("{\"bogus\": 1}"), ErrorCode::kInvalidSpec);
}

TEST(Generate, CountsPerSplit) {
  SyntheticSpec s = SmallSpec();
  s.train_per_class = 50;
  s.id_test_per_class = 50;
  const SyntheticDataset d = GenerateDataset(s);
  for (Split split : {Split::kTrain, Split::kIdTest}) {
    std::vector<int> counts(2, 0);
    for (const SampleRecord* r : d.manifest.WithSplit(split)) ++counts[r->label];
    EXPECT_EQ(counts, (std::vector<int>{50, 50}));
  }
  std::vector<int> ood(2, 0);
  for (const SampleRecord* r : d.manifest.WithSplit(Split::kOodTest)) ++ood[r->label];
  EXPECT_EQ(ood, (std::vector<int>{8, 2}));
}

TEST(Generate, SplitProperties) {
  const SyntheticDataset d = GenerateDataset(SmallSpec());
  for (const SampleRecord& r : d.manifest.records) {
    ASSERT_TRUE(d.images.count(r.sample_id));
    const Tensor& img = d.images.at(r.sample_id);
    EXPECT_EQ(img.shape(), (Shape{28, 28, 1}));
    EXPECT_EQ(img.dtype(), DType::kFloat32);
    for (double v : img.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    if (r.split == Split::kOodTest) {
      EXPECT_TRUE(r.has_artefact);
      ASSERT_TRUE(r.counterfactual_id.has_value());
      EXPECT_TRUE(d.images.count(*r.counterfactual_id));
      EXPECT_TRUE(d.masks.count(r.sample_id));
    } else {
      EXPECT_FALSE(r.has_artefact);
      EXPECT_FALSE(r.counterfactual_id.has_value());
      EXPECT_FALSE(d.masks.count(r.sample_id));
    }
  }
}

TEST(Generate, Deterministic) {
  TempDir a("synth_a"), b("synth_b");
  const SyntheticDataset d1 = GenerateDataset(SmallSpec());
  const SyntheticDataset d2 = GenerateDataset(SmallSpec());
  EXPECT_EQ(d1.manifest, d2.manifest);
  EXPECT_EQ(d1.images, d2.images);
  EXPECT_EQ(d1.masks, d2.masks);
  WriteDataset(d1, a.path());
  WriteDataset(d2, b.path());
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a.path());
    EXPECT_EQ(testing::ReadBytes(entry.path()), testing::ReadBytes(b.path() / rel)) << rel;
  }
  SyntheticSpec other = SmallSpec();
  other.seed = 4;
  EXPECT_FALSE(GenerateDataset(other).images == d1.images);
}

TEST(Generate, WrittenImagesReadBack) {
  TempDir dir("synth_write");
  const SyntheticDataset d = GenerateDataset(SmallSpec());
  WriteDataset(d, dir.path());
  const DatasetManifest m = ReadManifest(dir.path() / "manifest.csv", dir.path() / "images");
  EXPECT_EQ(m, d.manifest);
  const auto& first = d.manifest.records.front().sample_id;
  EXPECT_EQ(ReadArrayFile(dir.path() / "images" / (first + ".npy")), d.images.at(first));
}

TEST(Generate, ClassSignalDiffersByClass) {
  const SyntheticSpec s;
  double peak[2] = {0.0, 0.0};
  for (int y = 0; y < 2; ++y) {
    for (std::uint64_t k = 0; k < 40; ++k) {
      const Tensor img = RenderCleanImage(s, y, k);
      double m = 0.0;
      for (double v : img.values()) m = std::max(m, v);
      peak[y] += m / 40.0;
    }
  }
  EXPECT_GT(peak[0], peak[1] + 0.1);
}

TEST(Generate, CounterfactualsDifferOnlyInMaskAndFeather) {
  const SyntheticSpec s = SmallSpec();
  const SyntheticDataset d = GenerateDataset(s);
  for (const SampleRecord* r : d.manifest.WithSplit(Split::kOodTest)) {
    const Tensor& img = d.images.at(r->sample_id);
    const Tensor& cf = d.images.at(*r->counterfactual_id);
    const Tensor& mask = d.masks.at(r->sample_id);
    const Tensor band = FeatherBand(mask, FindSourceOffset(mask), s.feather_sigma);
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (img[i] != cf[i]) {
        EXPECT_TRUE(mask.int_values()[i] != 0 || band.int_values()[i] != 0)
            << r->sample_id << " pixel " << i;
      }
    }
  }
}

// Pearson chi-square of artefact presence against class over the test splits.
double ChiSquare(const SyntheticDataset& d) {
  double n[2][2] = {{0, 0}, {0, 0}};
  for (const SampleRecord& r : d.manifest.records) {
    if (r.split == Split::kTrain) continue;
    n[r.has_artefact ? 1 : 0][r.label] += 1.0;
  }
  const double total = n[0][0] + n[0][1] + n[1][0] + n[1][1];
  double chi = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int y = 0; y < 2; ++y) {
      const double e = (n[a][0] + n[a][1]) * (n[0][y] + n[1][y]) / total;
      chi += (n[a][y] - e) * (n[a][y] - e) / e;
    }
  }
  return chi;
}

double ChiSquarePValue1Dof(double chi) { return std::erfc(std::sqrt(chi / 2.0)); }

TEST(Generate, ArtefactClassCorrelationFollowsRho) {
  SyntheticSpec s = SmallSpec();
  s.train_per_class = 2;
  s.id_test_per_class = 400;
  s.ood_test_per_class = 400;
  s.rho = 0.5;
  EXPECT_GT(ChiSquarePValue1Dof(ChiSquare(GenerateDataset(s))), 0.01);
  s.rho = 0.8;
  EXPECT_LT(ChiSquarePValue1Dof(ChiSquare(GenerateDataset(s))), 0.01);
}

TEST(Inject, OnlyMaskedPixelsChange) {
  CounterRng rng(1);
  for (ArtefactKind kind : {ArtefactKind::kRulerLines, ArtefactKind::kCornerAnnotation}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      ArtefactParams p;
      p.kind = kind;
      const Tensor img = testing::RandomTensor(rng, {28, 28, 1}, 0.0, 0.5).WithDType(DType::kFloat32);
      const InjectedArtefact out = InjectArtefact(img, p, seed);
      std::size_t on = 0;
      for (std::size_t i = 0; i < img.size(); ++i) {
        if (out.mask.int_values()[i]) {
          ++on;
          EXPECT_EQ(out.image[i], static_cast<double>(static_cast<float>(std::min(1.0, img[i] + p.intensity))));
        } else {
          EXPECT_EQ(out.image[i], img[i]);
        }
      }
      EXPECT_GT(on, 0u);
    }
  }
}

TEST(Inject, RulerMatchesDirectRender) {
  ArtefactParams p;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const InjectedArtefact out = InjectArtefact(Flat(0.2), p, seed);
    // Row band_top + 1 holds only ticks, so its first set column is the phase.
    std::size_t phase = 0;
    while (!MaskAt(out.mask, p.band_top + 1, phase)) ++phase;
    ASSERT_LT(phase, p.tick_spacing);
    for (std::size_t r = 0; r < 28; ++r) {
      for (std::size_t c = 0; c < 28; ++c) {
        const bool line = r >= p.band_top && (r - p.band_top) % p.line_spacing == 0 &&
                          (r - p.band_top) / p.line_spacing < p.num_lines;
        const bool tick = r >= p.band_top && r < p.band_top + p.tick_length && c >= phase &&
                          (c - phase) % p.tick_spacing == 0;
        EXPECT_EQ(MaskAt(out.mask, r, c), line || tick) << r << "," << c;
      }
    }
  }
}

TEST(Inject, AnnotationSitsInACorner) {
  ArtefactParams p;
  p.kind = ArtefactKind::kCornerAnnotation;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const InjectedArtefact out = InjectArtefact(Flat(0.2), p, seed);
    std::size_t rmin = 28, rmax = 0, cmin = 28, cmax = 0;
    for (std::size_t r = 0; r < 28; ++r) {
      for (std::size_t c = 0; c < 28; ++c) {
        if (!MaskAt(out.mask, r, c)) continue;
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
      }
    }
    EXPECT_EQ(rmax - rmin + 1, p.mark_size);
    EXPECT_EQ(cmax - cmin + 1, p.mark_size);
    EXPECT_TRUE(rmin == p.margin || rmax == 27 - p.margin);
    EXPECT_TRUE(cmin == p.margin || cmax == 27 - p.margin);
  }
}

TEST(Inject, ZeroIntensityKeepsImage) {
  ArtefactParams p;
  p.intensity = 0.0;
  const Tensor img = Flat(0.3);
  const InjectedArtefact out = InjectArtefact(img, p, 5);
  EXPECT_EQ(out.image, img);
  std::int64_t on = 0;
  for (std::int64_t v : out.mask.int_values()) on += v;
  EXPECT_GT(on, 0);
}

TEST(Inject, ProtectedBoxIsEnforced) {
  ArtefactParams p;
  EXPECT_OODGATE_ERROR(InjectArtefact(Flat(0.2), p, 0, PixelBox{20, 28, 0, 28}),
                       ErrorCode::kArtefactOverlapsSignal);
}

TEST(Remove, ZeroSigmaCopiesSource) {
  CounterRng rng(4);
  ArtefactParams p;
  const Tensor clean = testing::RandomTensor(rng, {28, 28, 1}, 0.0, 0.5);
  const InjectedArtefact inj = InjectArtefact(clean, p, 1);
  const Offset o = FindSourceOffset(inj.mask);
  const Tensor cf = RemoveArtefact(inj.image, inj.mask, o, 0.0);
  for (std::size_t r = 0; r < 28; ++r) {
    for (std::size_t c = 0; c < 28; ++c) {
      const std::size_t i = r * 28 + c;
      if (MaskAt(inj.mask, r, c)) {
        EXPECT_EQ(cf[i], inj.image[(r + o.rows) * 28 + (c + o.cols)]);
      } else {
        EXPECT_EQ(cf[i], inj.image[i]);
      }
    }
  }
}

TEST(Remove, FlatFieldIsInvertible) {
  for (ArtefactKind kind : {ArtefactKind::kRulerLines, ArtefactKind::kCornerAnnotation}) {
    ArtefactParams p;
    p.kind = kind;
    const Tensor flat = Flat(0.25);
    const InjectedArtefact inj = InjectArtefact(flat, p, 9);
    const Tensor cf = RemoveArtefact(inj.image, inj.mask, FindSourceOffset(inj.mask), 1.5);
    for (std::size_t i = 0; i < flat.size(); ++i) EXPECT_LT(std::abs(cf[i] - flat[i]), 1e-6);
  }
}

TEST(Remove, FarPixelsUnchanged) {
  CounterRng rng(6);
  ArtefactParams p;
  p.kind = ArtefactKind::kCornerAnnotation;
  const double sigma = 1.0;
  const InjectedArtefact inj =
      InjectArtefact(testing::RandomTensor(rng, {28, 28, 1}, 0.0, 0.5), p, 2);
  const Tensor cf = RemoveArtefact(inj.image, inj.mask, FindSourceOffset(inj.mask), sigma);
  for (std::size_t r = 0; r < 28; ++r) {
    for (std::size_t c = 0; c < 28; ++c) {
      double best = INFINITY;
      for (std::size_t r2 = 0; r2 < 28; ++r2) {
        for (std::size_t c2 = 0; c2 < 28; ++c2) {
          if (!MaskAt(inj.mask, r2, c2)) continue;
          best = std::min(best, std::hypot(double(r) - double(r2), double(c) - double(c2)));
        }
      }
      if (best > 3.0 * sigma) {
        EXPECT_EQ(cf[r * 28 + c], inj.image[r * 28 + c]);
      }
    }
  }
}

TEST(Remove, SourceOffsetIsSmallestDisjointShift) {
  ArtefactParams p;
  const InjectedArtefact inj = InjectArtefact(Flat(0.2), p, 0);
  const Offset o = FindSourceOffset(inj.mask);
  // The ruler band spans band_top .. band_top + 3 inclusive; moving it up by
  // its height is the first disjoint shift.
  EXPECT_EQ(o, (Offset{-4, 0}));

  Tensor single = Tensor::FromInt64({5, 5, 1}, std::vector<std::int64_t>(25, 0));
  std::vector<std::int64_t> bits(25, 0);
  bits[0] = 1;
  single = Tensor::FromInt64({5, 5, 1}, bits);
  EXPECT_EQ(FindSourceOffset(single), (Offset{1, 0}));
  EXPECT_OODGATE_ERROR(FindSourceOffset(Tensor::FromInt64({3, 3, 1}, std::vector<std::int64_t>(9, 1))),
                       ErrorCode::kSourceOverlapsMask);
}

TEST(Remove, RejectsBadOffsets) {
  ArtefactParams p;
  const InjectedArtefact inj = InjectArtefact(Flat(0.2), p, 0);
  EXPECT_OODGATE_ERROR(RemoveArtefact(inj.image, inj.mask, {1, 0}, 1.0),
                       ErrorCode::kSourceOverlapsMask);
  EXPECT_OODGATE_ERROR(RemoveArtefact(inj.image, inj.mask, {5, 0}, 1.0),
                       ErrorCode::kOutOfBounds);
}

}  // namespace
}  // namespace oodgate
