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

// Hidden-layer (feature-based) OOD scores: class-conditional Gaussian
// distances and Gram-matrix range deviations. Higher means more ID.

#ifndef OODGATE_FEATURE_H_
#define OODGATE_FEATURE_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "oodgate/tensor.h"

namespace oodgate {

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  // Inverse of covariance + regularizer * I.
  Eigen::MatrixXd precision;
  double regularizer = 0.0;
};

// One Gaussian per class label 0..K-1.
struct ClassGaussianStats {
  std::vector<Gaussian> classes;
  bool shared_covariance = false;

  std::size_t dim() const { return classes.empty() ? 0 : classes[0].mean.size(); }
};

// Class-agnostic Gaussian over all training features.
struct BackgroundGaussianStats {
  Gaussian gaussian;
};

struct GaussianFitOptions {
  // Absolute regularizer. When unset: 1e-3 * trace(covariance) / M.
  std::optional<double> regularizer;
  // Pool the within-class scatter into one covariance shared by all classes.
  bool shared_covariance = false;
};

// Sample covariance uses divisor N - 1 (N - K when shared). Throws
// ClassUnderpopulated below two samples per class and SingularCovariance if
// the regularized covariance cannot be inverted.
ClassGaussianStats FitClassGaussians(std::span<const Tensor> features,
                                     std::span<const int> labels,
                                     const GaussianFitOptions& options = {});
BackgroundGaussianStats FitBackgroundGaussian(std::span<const Tensor> features,
                                              const GaussianFitOptions& options = {});

// (z - mu)^T P (z - mu), clamped at 0 once checked to be >= -1e-10.
double MahalanobisDistance(std::span<const double> z, const Gaussian& g);

// Smallest class distance and the class attaining it.
std::pair<double, int> MinClassDistance(std::span<const double> z,
                                        const ClassGaussianStats& stats);

// -min_y d_y(z).
double ScoreMahalanobis(std::span<const double> z, const ClassGaussianStats& stats);
// -(min_y d_y(z) - d_0(z)).
double ScoreRms(std::span<const double> z, const ClassGaussianStats& class_stats,
                const BackgroundGaussianStats& background);

struct LayerSelection {
  std::vector<std::size_t> layers;
  // Mean min-class distance of each layer on an ID fold.
  std::vector<double> normalizers;
};

// normalizers[l] = mean over the fold of min_y d_{l,y}; fold_features is
// indexed [layer][sample].
LayerSelection FitLayerSelection(std::vector<std::size_t> layers,
                                 const std::vector<std::vector<Tensor>>& fold_features,
                                 std::span<const ClassGaussianStats> stats_per_layer);

// -sum_l min_y d_{l,y}(z_l) / n_l.
double ScoreMbm(std::span<const Tensor> z_per_layer, const LayerSelection& selection,
                std::span<const ClassGaussianStats> stats_per_layer);

// p-th order Gram matrices (p = 1..orders) of a [J, J, M] map: rows of F are
// the channel vectors with every entry raised to the p-th power keeping its
// sign, and G_p = F F^T, stored row-major M x M.
std::vector<std::vector<double>> GramMatrices(const Tensor& map, int orders);

struct GramReference {
  int orders = 1;
  // Model layer index of each map position.
  std::vector<std::size_t> layers;
  std::vector<std::size_t> channels;
  // [layer][class][order - 1] -> M x M row-major bounds.
  std::vector<std::vector<std::vector<std::vector<double>>>> mins;
  std::vector<std::vector<std::vector<std::vector<double>>>> maxs;
  // Expected total deviation E_l per layer, from the held-out fold.
  std::vector<double> expected_deviation;

  std::size_t num_classes() const { return mins.empty() ? 0 : mins[0].size(); }
};

// maps[s][l] is the map of sample s at position l of `layers`. Every
// `holdout_every`-th sample (index % holdout_every == holdout_every - 1) is
// held out to estimate E_l instead of contributing to the ranges; with fewer
// samples than holdout_every nothing is held out and E_l = 1.
GramReference FitGramReference(const std::vector<std::vector<Tensor>>& maps,
                               std::span<const int> labels,
                               std::vector<std::size_t> layers, int orders,
                               std::size_t holdout_every = 10);

// 0 inside [lo, hi], otherwise the distance to the nearest bound relative to
// |bound| + 1e-12.
double RangeDeviation(double v, double lo, double hi);

// Unnormalized deviation summed over orders and entries, per layer.
std::vector<double> GramLayerDeviations(std::span<const Tensor> maps,
                                        const GramReference& reference, int cls);

// -sum_l deviation_l / E_l against the ranges of `predicted_class`.
double ScoreGram(std::span<const Tensor> maps, const GramReference& reference,
                 int predicted_class);

// Array files plus an index.json; see feature_io.cc for the layout.
void SaveClassGaussians(const ClassGaussianStats& stats, const std::filesystem::path& dir);
ClassGaussianStats LoadClassGaussians(const std::filesystem::path& dir);
void SaveBackgroundGaussian(const BackgroundGaussianStats& stats,
                            const std::filesystem::path& dir);
BackgroundGaussianStats LoadBackgroundGaussian(const std::filesystem::path& dir);
void SaveGramReference(const GramReference& reference, const std::filesystem::path& dir);
GramReference LoadGramReference(const std::filesystem::path& dir);

}  // namespace oodgate

#endif  // OODGATE_FEATURE_H_
