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

#include "oodgate/feature.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "oodgate/error.h"

namespace oodgate {
namespace {

constexpr double kInverseTolerance = 1e-6;
constexpr double kQuadraticFormFloor = -1e-10;

Eigen::VectorXd ToVector(const Tensor& t) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) v[static_cast<Eigen::Index>(i)] = t.at(i);
  return v;
}

std::size_t CommonDim(std::span<const Tensor> features) {
  Require(!features.empty(), ErrorCode::kEmptySamples, "no feature vectors");
  const std::size_t m = features[0].size();
  Require(m >= 1, ErrorCode::kDimensionMismatch, "feature vectors are empty");
  for (const Tensor& f : features) {
    Require(f.size() == m, ErrorCode::kDimensionMismatch,
            "feature vectors differ in length (" + std::to_string(f.size()) + " vs " +
                std::to_string(m) + ")");
  }
  return m;
}

// Fills regularizer and precision from covariance.
void Regularize(Gaussian& g, const GaussianFitOptions& options) {
  const auto m = g.covariance.rows();
  g.regularizer = options.regularizer.value_or(1e-3 * g.covariance.trace() /
                                               static_cast<double>(m));
  Require(g.regularizer >= 0.0 && std::isfinite(g.regularizer),
          ErrorCode::kInvariantViolation, "regularizer must be finite and >= 0");
  const Eigen::MatrixXd a =
      g.covariance + g.regularizer * Eigen::MatrixXd::Identity(m, m);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  Require(llt.info() == Eigen::Success, ErrorCode::kSingularCovariance,
          "regularized covariance is not positive definite");
  Eigen::MatrixXd p = llt.solve(Eigen::MatrixXd::Identity(m, m));
  p = 0.5 * (p + p.transpose());
  const double residual = (p * a - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
  Require(std::isfinite(residual) && residual <= kInverseTolerance,
          ErrorCode::kSingularCovariance,
          "covariance inverse residual " + std::to_string(residual));
  g.precision = std::move(p);
}

Eigen::MatrixXd Scatter(std::span<const Tensor> features, std::span<const std::size_t> members,
                        const Eigen::VectorXd& mean) {
  const auto m = mean.size();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t idx : members) {
    const Eigen::VectorXd d = ToVector(features[idx]) - mean;
    s.noalias() += d * d.transpose();
  }
  return s;
}

Eigen::VectorXd Mean(std::span<const Tensor> features, std::span<const std::size_t> members,
                     std::size_t m) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t idx : members) mean += ToVector(features[idx]);
  return mean / static_cast<double>(members.size());
}

}  // namespace

ClassGaussianStats FitClassGaussians(std::span<const Tensor> features,
                                     std::span<const int> labels,
                                     const GaussianFitOptions& options) {
  const std::size_t m = CommonDim(features);
  Require(labels.size() == features.size(), ErrorCode::kDimensionMismatch,
          "features and labels differ in length");
  int k = 0;
  for (int y : labels) {
    Require(y >= 0, ErrorCode::kInvariantViolation, "negative label");
    k = std::max(k, y + 1);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (int y = 0; y < k; ++y) {
    Require(members[static_cast<std::size_t>(y)].size() >= 2, ErrorCode::kClassUnderpopulated,
            "class " + std::to_string(y) + " has fewer than two samples");
  }

  ClassGaussianStats stats;
  stats.shared_covariance = options.shared_covariance;
  stats.classes.resize(static_cast<std::size_t>(k));
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                                 static_cast<Eigen::Index>(m));
  for (std::size_t y = 0; y < stats.classes.size(); ++y) {
    Gaussian& g = stats.classes[y];
    g.mean = Mean(features, members[y], m);
    const Eigen::MatrixXd scatter = Scatter(features, members[y], g.mean);
    if (options.shared_covariance) {
      pooled += scatter;
    } else {
      g.covariance = scatter / static_cast<double>(members[y].size() - 1);
    }
  }
  if (options.shared_covariance) {
    Require(features.size() > static_cast<std::size_t>(k), ErrorCode::kClassUnderpopulated,
            "too few samples for a pooled covariance");
    pooled /= static_cast<double>(features.size() - static_cast<std::size_t>(k));
    Gaussian shared;
    shared.covariance = pooled;
    Regularize(shared, options);
    for (Gaussian& g : stats.classes) {
      g.covariance = shared.covariance;
      g.precision = shared.precision;
      g.regularizer = shared.regularizer;
    }
  } else {
    for (Gaussian& g : stats.classes) Regularize(g, options);
  }
  return stats;
}

BackgroundGaussianStats FitBackgroundGaussian(std::span<const Tensor> features,
                                              const GaussianFitOptions& options) {
  const std::size_t m = CommonDim(features);
  Require(features.size() >= 2, ErrorCode::kClassUnderpopulated,
          "background fit needs at least two samples");
  std::vector<std::size_t> all(features.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  BackgroundGaussianStats stats;
  stats.gaussian.mean = Mean(features, all, m);
  stats.gaussian.covariance = Scatter(features, all, stats.gaussian.mean) /
                              static_cast<double>(features.size() - 1);
  Regularize(stats.gaussian, options);
  return stats;
}

double MahalanobisDistance(std::span<const double> z, const Gaussian& g) {
  if (static_cast<Eigen::Index>(z.size()) != g.mean.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature vector has " + std::to_string(z.size()) +
                    " entries, statistics expect " + std::to_string(g.mean.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(z.size()));
  const Eigen::VectorXd d = zv - g.mean;
  const double q = d.dot(g.precision * d);
  if (!(q >= kQuadraticFormFloor)) {
    throw Error(ErrorCode::kInvariantViolation, "negative quadratic form " + std::to_string(q));
  }
  return std::max(0.0, q);
}

std::pair<double, int> MinClassDistance(std::span<const double> z,
                                        const ClassGaussianStats& stats) {
  Require(!stats.classes.empty(), ErrorCode::kMissingFitStatistics, "no fitted classes");
  double best = std::numeric_limits<double>::infinity();
  int best_class = 0;
  for (std::size_t y = 0; y < stats.classes.size(); ++y) {
    const double d = MahalanobisDistance(z, stats.classes[y]);
    if (d < best) {
      best = d;
      best_class = static_cast<int>(y);
    }
  }
  return {best, best_class};
}

double ScoreMahalanobis(std::span<const double> z, const ClassGaussianStats& stats) {
  return -MinClassDistance(z, stats).first;
}

double ScoreRms(std::span<const double> z, const ClassGaussianStats& class_stats,
                const BackgroundGaussianStats& background) {
  const double d_min = MinClassDistance(z, class_stats).first;
  const double d_0 = MahalanobisDistance(z, background.gaussian);
  return -(d_min - d_0);
}

LayerSelection FitLayerSelection(std::vector<std::size_t> layers,
                                 const std::vector<std::vector<Tensor>>& fold_features,
                                 std::span<const ClassGaussianStats> stats_per_layer) {
  Require(!layers.empty(), ErrorCode::kMissingLayer, "empty layer selection");
  Require(fold_features.size() == layers.size() && stats_per_layer.size() == layers.size(),
          ErrorCode::kMissingLayer, "one feature set and one fit per layer required");
  LayerSelection selection;
  selection.layers = std::move(layers);
  for (std::size_t l = 0; l < selection.layers.size(); ++l) {
    Require(!fold_features[l].empty(), ErrorCode::kEmptySamples, "empty normalization fold");
    double total = 0.0;
    for (const Tensor& z : fold_features[l]) {
      total += MinClassDistance(z.values(), stats_per_layer[l]).first;
    }
    const double n = total / static_cast<double>(fold_features[l].size());
    Require(n > 0.0 && std::isfinite(n), ErrorCode::kInvariantViolation,
            "layer normalizer must be positive");
    selection.normalizers.push_back(n);
  }
  return selection;
}

double ScoreMbm(std::span<const Tensor> z_per_layer, const LayerSelection& selection,
                std::span<const ClassGaussianStats> stats_per_layer) {
  const std::size_t n = selection.layers.size();
  Require(n > 0 && selection.normalizers.size() == n, ErrorCode::kMissingLayer,
          "layer selection without normalizers");
  Require(z_per_layer.size() == n && stats_per_layer.size() == n, ErrorCode::kMissingLayer,
          "expected " + std::to_string(n) + " layers of features and statistics");
  double total = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    total += MinClassDistance(z_per_layer[l].values(), stats_per_layer[l]).first /
             selection.normalizers[l];
  }
  return -total;
}

std::vector<std::vector<double>> GramMatrices(const Tensor& map, int orders) {
  Require(map.rank() == 3, ErrorCode::kNotAFeatureLayer,
          "Gram matrices need a [J,J,M] map, got " + ShapeString(map.shape()));
  Require(orders >= 1, ErrorCode::kInvariantViolation, "orders must be >= 1");
  const std::size_t spatial = map.shape()[0] * map.shape()[1];
  const std::size_t m = map.shape()[2];
  // Channel-major copy: row c holds channel c over the spatial grid.
  std::vector<double> base(m * spatial);
  for (std::size_t s = 0; s < spatial; ++s) {
    for (std::size_t c = 0; c < m; ++c) base[c * spatial + s] = map[s * m + c];
  }
  std::vector<std::vector<double>> grams;
  grams.reserve(static_cast<std::size_t>(orders));
  std::vector<double> powered(base.size());
  for (int p = 1; p <= orders; ++p) {
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double a = std::abs(base[i]);
      double v = a;
      for (int e = 1; e < p; ++e) v *= a;
      powered[i] = base[i] < 0.0 ? -v : v;
    }
    std::vector<double> g(m * m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      const double* fr = powered.data() + r * spatial;
      for (std::size_t c = r; c < m; ++c) {
        const double* fc = powered.data() + c * spatial;
        double acc = 0.0;
        for (std::size_t s = 0; s < spatial; ++s) acc += fr[s] * fc[s];
        g[r * m + c] = acc;
        g[c * m + r] = acc;
      }
    }
    grams.push_back(std::move(g));
  }
  return grams;
}

double RangeDeviation(double v, double lo, double hi) {
  if (v < lo) return (lo - v) / (std::abs(lo) + 1e-12);
  if (v > hi) return (v - hi) / (std::abs(hi) + 1e-12);
  return 0.0;
}

GramReference FitGramReference(const std::vector<std::vector<Tensor>>& maps,
                               std::span<const int> labels, std::vector<std::size_t> layers,
                               int orders, std::size_t holdout_every) {
  Require(orders >= 1, ErrorCode::kInvariantViolation, "orders must be >= 1");
  Require(!maps.empty(), ErrorCode::kEmptyClass, "no samples for the Gram reference");
  Require(maps.size() == labels.size(), ErrorCode::kDimensionMismatch,
          "maps and labels differ in length");
  Require(!layers.empty(), ErrorCode::kMissingLayer, "no layers for the Gram reference");
  const std::size_t num_layers = layers.size();
  int k = 0;
  for (int y : labels) {
    Require(y >= 0, ErrorCode::kInvariantViolation, "negative label");
    k = std::max(k, y + 1);
  }

  GramReference ref;
  ref.orders = orders;
  ref.layers = std::move(layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    Require(maps[0].size() == num_layers && maps[0][l].rank() == 3,
            ErrorCode::kNotAFeatureLayer, "every sample needs one [J,J,M] map per layer");
    ref.channels.push_back(maps[0][l].shape()[2]);
  }
  const auto p_count = static_cast<std::size_t>(orders);
  ref.mins.assign(num_layers, std::vector<std::vector<std::vector<double>>>(
                                  static_cast<std::size_t>(k),
                                  std::vector<std::vector<double>>(p_count)));
  ref.maxs = ref.mins;

  const bool use_holdout = holdout_every > 1 && maps.size() >= holdout_every;
  const auto held_out = [&](std::size_t i) {
    return use_holdout && i % holdout_every == holdout_every - 1;
  };

  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (held_out(i)) continue;
    Require(maps[i].size() == num_layers, ErrorCode::kMissingLayer,
            "sample " + std::to_string(i) + " lacks a layer map");
    const auto y = static_cast<std::size_t>(labels[i]);
    for (std::size_t l = 0; l < num_layers; ++l) {
      Require(maps[i][l].rank() == 3 && maps[i][l].shape()[2] == ref.channels[l],
              ErrorCode::kDimensionMismatch, "map channel count changed between samples");
      const auto grams = GramMatrices(maps[i][l], orders);
      for (std::size_t p = 0; p < p_count; ++p) {
        auto& lo = ref.mins[l][y][p];
        auto& hi = ref.maxs[l][y][p];
        if (!seen[y]) {
          lo = grams[p];
          hi = grams[p];
          continue;
        }
        for (std::size_t e = 0; e < grams[p].size(); ++e) {
          lo[e] = std::min(lo[e], grams[p][e]);
          hi[e] = std::max(hi[e], grams[p][e]);
        }
      }
    }
    seen[y] = true;
  }
  for (int y = 0; y < k; ++y) {
    Require(seen[static_cast<std::size_t>(y)], ErrorCode::kEmptyClass,
            "class " + std::to_string(y) + " has no samples to fit Gram ranges");
  }

  std::vector<double> totals(num_layers, 0.0);
  std::size_t held = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (!held_out(i)) continue;
    const std::vector<double> dev = GramLayerDeviations(maps[i], ref, labels[i]);
    for (std::size_t l = 0; l < num_layers; ++l) totals[l] += dev[l];
    ++held;
  }
  for (std::size_t l = 0; l < num_layers; ++l) {
    const double mean = held > 0 ? totals[l] / static_cast<double>(held) : 0.0;
    // A fold that never leaves the ranges carries no scale; fall back to 1.
    ref.expected_deviation.push_back(mean > 0.0 ? mean : 1.0);
  }
  return ref;
}

std::vector<double> GramLayerDeviations(std::span<const Tensor> maps,
                                        const GramReference& reference, int cls) {
  Require(cls >= 0 && static_cast<std::size_t>(cls) < reference.num_classes(),
          ErrorCode::kClassMissingInReference,
          "class " + std::to_string(cls) + " has no Gram reference");
  Require(maps.size() == reference.layers.size(), ErrorCode::kMissingLayer,
          "expected " + std::to_string(reference.layers.size()) + " layer maps");
  std::vector<double> out;
  out.reserve(maps.size());
  const auto y = static_cast<std::size_t>(cls);
  for (std::size_t l = 0; l < maps.size(); ++l) {
    Require(maps[l].rank() == 3 && maps[l].shape()[2] == reference.channels[l],
            ErrorCode::kDimensionMismatch, "map does not match the reference channels");
    const auto grams = GramMatrices(maps[l], reference.orders);
    double total = 0.0;
    for (std::size_t p = 0; p < grams.size(); ++p) {
      const auto& lo = reference.mins[l][y][p];
      const auto& hi = reference.maxs[l][y][p];
      for (std::size_t e = 0; e < grams[p].size(); ++e) {
        total += RangeDeviation(grams[p][e], lo[e], hi[e]);
      }
    }
    out.push_back(total);
  }
  return out;
}

double ScoreGram(std::span<const Tensor> maps, const GramReference& reference,
                 int predicted_class) {
  const std::vector<double> dev = GramLayerDeviations(maps, reference, predicted_class);
  double total = 0.0;
  for (std::size_t l = 0; l < dev.size(); ++l) total += dev[l] / reference.expected_deviation[l];
  return -total;
}

}  // namespace oodgate
