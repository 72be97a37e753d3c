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

// Independent reference implementations used as test oracles. They share no
// code with the library beyond its public types.

#ifndef OODGATE_TESTS_ORACLES_H_
#define OODGATE_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "oodgate/model.h"
#include "oodgate/tensor.h"

namespace oodgate::oracles {

using Matrix = std::vector<std::vector<double>>;

// Gauss-Jordan inverse with partial pivoting.
inline Matrix Invert(Matrix a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const double d = a[c][c];
    for (std::size_t j = 0; j < n; ++j) {
      a[c][j] /= d;
      inv[c][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[c][j];
        inv[r][j] -= f * inv[c][j];
      }
    }
  }
  return inv;
}

// Class distance from scratch: mean, N-1 covariance plus lambda * I,
// explicit inverse, quadratic form by loops.
inline double ClassDistance(const std::vector<Tensor>& xs, const std::vector<int>& ys, int cls,
                            const std::vector<double>& z, double lambda) {
  const std::size_t m = z.size();
  std::vector<double> mean(m, 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ys[i] != cls) continue;
    ++n;
    for (std::size_t j = 0; j < m; ++j) mean[j] += xs[i][j];
  }
  for (double& v : mean) v /= static_cast<double>(n);
  Matrix cov(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ys[i] != cls) continue;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        cov[a][b] += (xs[i][a] - mean[a]) * (xs[i][b] - mean[b]);
      }
    }
  }
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) cov[a][b] /= static_cast<double>(n - 1);
    cov[a][a] += lambda;
  }
  const Matrix p = Invert(cov);
  double q = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) q += (z[a] - mean[a]) * p[a][b] * (z[b] - mean[b]);
  }
  return q;
}

// -min over classes 0..k-1 of ClassDistance.
inline double MahalanobisScore(const std::vector<Tensor>& xs, const std::vector<int>& ys, int k,
                               const std::vector<double>& z, double lambda) {
  double best = INFINITY;
  for (int y = 0; y < k; ++y) best = std::min(best, ClassDistance(xs, ys, y, z, lambda));
  return -best;
}

// Exhaustive pair count, ties worth one half.
inline double PairwiseAuroc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(pos.size() * neg.size());
}

// Central differences of the objective along every input coordinate.
inline Tensor NumericGradient(const ModelSpec& spec, const ModelParams& params, const Tensor& x,
                              const Objective& objective, double h = 1e-5) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = EvaluateObjective(objective, Forward(spec, params, probe).logits);
    probe[i] = x[i] - h;
    const double down = EvaluateObjective(objective, Forward(spec, params, probe).logits);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max |a - b| / max |b|.
inline double MaxRelativeError(const Tensor& a, const Tensor& b) {
  double diff = 0.0, scale = 1e-12;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

}  // namespace oodgate::oracles

#endif  // OODGATE_TESTS_ORACLES_H_
