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

// Layout of a statistics directory:
//   index.json            kind, counts and scalar fields
//   <c>.mean.npy ...      one set of arrays per Gaussian
//   gram.<l>.<c>.min.npy  [orders, M, M] bounds for the Gram reference

#include <fstream>
#include <iterator>
#include <string>

#include "json.hpp"
#include "oodgate/error.h"
#include "oodgate/feature.h"
#include "oodgate/npy.h"

namespace oodgate {

using Json = nlohmann::ordered_json;

namespace {

namespace fs = std::filesystem;

void WriteIndex(const Json& j, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "index.json", std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorCode::kIoFailure, "cannot write " + (dir / "index.json").string());
  out << j.dump(2) << "\n";
}

Json ReadIndex(const fs::path& dir, const std::string& kind) {
  std::ifstream in(dir / "index.json", std::ios::binary);
  Require(in.good(), ErrorCode::kIoFailure, "cannot open " + (dir / "index.json").string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("statistics index: ") + e.what());
  }
  Require(j.value("kind", std::string()) == kind, ErrorCode::kSchemaMismatch,
          "expected statistics of kind '" + kind + "' in " + dir.string());
  return j;
}

Tensor FromVector(const Eigen::VectorXd& v) {
  return Tensor(Shape{static_cast<std::size_t>(v.size())},
                std::vector<double>(v.data(), v.data() + v.size()));
}

// Row-major copy.
Tensor FromMatrix(const Eigen::MatrixXd& m) {
  const auto r = static_cast<std::size_t>(m.rows());
  const auto c = static_cast<std::size_t>(m.cols());
  std::vector<double> values(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      values[i * c + j] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return Tensor(Shape{r, c}, std::move(values));
}

Eigen::VectorXd ToVector(const Tensor& t) {
  Require(t.rank() == 1, ErrorCode::kSchemaMismatch, "expected a vector array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) v[static_cast<Eigen::Index>(i)] = t.at(i);
  return v;
}

Eigen::MatrixXd ToMatrix(const Tensor& t, std::size_t dim) {
  Require(t.shape() == Shape{dim, dim}, ErrorCode::kSchemaMismatch,
          "expected a " + std::to_string(dim) + "x" + std::to_string(dim) + " array");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.at(i * dim + j);
    }
  }
  return m;
}

void SaveGaussian(const Gaussian& g, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  WriteArrayFile(FromVector(g.mean), dir / (stem + ".mean.npy"));
  WriteArrayFile(FromMatrix(g.covariance), dir / (stem + ".cov.npy"));
  WriteArrayFile(FromMatrix(g.precision), dir / (stem + ".prec.npy"));
}

Gaussian LoadGaussian(const fs::path& dir, const std::string& stem, double regularizer) {
  Gaussian g;
  g.mean = ToVector(ReadArrayFile(dir / (stem + ".mean.npy")));
  const auto m = static_cast<std::size_t>(g.mean.size());
  g.covariance = ToMatrix(ReadArrayFile(dir / (stem + ".cov.npy")), m);
  g.precision = ToMatrix(ReadArrayFile(dir / (stem + ".prec.npy")), m);
  g.regularizer = regularizer;
  return g;
}

Tensor StackBounds(const std::vector<std::vector<double>>& per_order, std::size_t m) {
  std::vector<double> values;
  values.reserve(per_order.size() * m * m);
  for (const auto& g : per_order) values.insert(values.end(), g.begin(), g.end());
  return Tensor(Shape{per_order.size(), m, m}, std::move(values));
}

std::vector<std::vector<double>> SplitBounds(const Tensor& t, std::size_t orders, std::size_t m) {
  Require(t.shape() == Shape{orders, m, m}, ErrorCode::kSchemaMismatch,
          "Gram bounds have shape " + ShapeString(t.shape()));
  std::vector<std::vector<double>> out(orders);
  const auto v = t.values();
  for (std::size_t p = 0; p < orders; ++p) {
    out[p].assign(v.begin() + static_cast<std::ptrdiff_t>(p * m * m),
                  v.begin() + static_cast<std::ptrdiff_t>((p + 1) * m * m));
  }
  return out;
}

}  // namespace

void SaveClassGaussians(const ClassGaussianStats& stats, const fs::path& dir) {
  Require(!stats.classes.empty(), ErrorCode::kMissingFitStatistics, "no class Gaussians");
  Json j;
  j["kind"] = "class_gaussians";
  j["num_classes"] = stats.classes.size();
  j["dim"] = stats.dim();
  j["shared_covariance"] = stats.shared_covariance;
  j["regularizers"] = Json::array();
  for (std::size_t c = 0; c < stats.classes.size(); ++c) {
    j["regularizers"].push_back(stats.classes[c].regularizer);
    SaveGaussian(stats.classes[c], dir, std::to_string(c));
  }
  WriteIndex(j, dir);
}

ClassGaussianStats LoadClassGaussians(const fs::path& dir) {
  const Json j = ReadIndex(dir, "class_gaussians");
  ClassGaussianStats stats;
  try {
    stats.shared_covariance = j.at("shared_covariance").get<bool>();
    const auto k = j.at("num_classes").get<std::size_t>();
    const auto& regs = j.at("regularizers");
    Require(regs.size() == k, ErrorCode::kSchemaMismatch, "regularizer count mismatch");
    for (std::size_t c = 0; c < k; ++c) {
      stats.classes.push_back(LoadGaussian(dir, std::to_string(c), regs[c].get<double>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("class Gaussians: ") + e.what());
  }
  return stats;
}

void SaveBackgroundGaussian(const BackgroundGaussianStats& stats, const fs::path& dir) {
  Json j;
  j["kind"] = "background_gaussian";
  j["dim"] = stats.gaussian.mean.size();
  j["regularizer"] = stats.gaussian.regularizer;
  SaveGaussian(stats.gaussian, dir, "background");
  WriteIndex(j, dir);
}

BackgroundGaussianStats LoadBackgroundGaussian(const fs::path& dir) {
  const Json j = ReadIndex(dir, "background_gaussian");
  try {
    return BackgroundGaussianStats{
        LoadGaussian(dir, "background", j.at("regularizer").get<double>())};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("background Gaussian: ") + e.what());
  }
}

void SaveGramReference(const GramReference& reference, const fs::path& dir) {
  Json j;
  j["kind"] = "gram_reference";
  j["orders"] = reference.orders;
  j["layers"] = reference.layers;
  j["channels"] = reference.channels;
  j["num_classes"] = reference.num_classes();
  j["expected_deviation"] = reference.expected_deviation;
  fs::create_directories(dir);
  for (std::size_t l = 0; l < reference.layers.size(); ++l) {
    for (std::size_t c = 0; c < reference.num_classes(); ++c) {
      const std::string stem = "gram." + std::to_string(l) + "." + std::to_string(c);
      WriteArrayFile(StackBounds(reference.mins[l][c], reference.channels[l]),
                     dir / (stem + ".min.npy"));
      WriteArrayFile(StackBounds(reference.maxs[l][c], reference.channels[l]),
                     dir / (stem + ".max.npy"));
    }
  }
  WriteIndex(j, dir);
}

GramReference LoadGramReference(const fs::path& dir) {
  const Json j = ReadIndex(dir, "gram_reference");
  GramReference ref;
  try {
    ref.orders = j.at("orders").get<int>();
    ref.layers = j.at("layers").get<std::vector<std::size_t>>();
    ref.channels = j.at("channels").get<std::vector<std::size_t>>();
    ref.expected_deviation = j.at("expected_deviation").get<std::vector<double>>();
    const auto k = j.at("num_classes").get<std::size_t>();
    Require(ref.orders >= 1 && ref.channels.size() == ref.layers.size() &&
                ref.expected_deviation.size() == ref.layers.size(),
            ErrorCode::kSchemaMismatch, "inconsistent Gram reference index");
    const auto orders = static_cast<std::size_t>(ref.orders);
    ref.mins.resize(ref.layers.size());
    ref.maxs.resize(ref.layers.size());
    for (std::size_t l = 0; l < ref.layers.size(); ++l) {
      for (std::size_t c = 0; c < k; ++c) {
        const std::string stem = "gram." + std::to_string(l) + "." + std::to_string(c);
        ref.mins[l].push_back(
            SplitBounds(ReadArrayFile(dir / (stem + ".min.npy")), orders, ref.channels[l]));
        ref.maxs[l].push_back(
            SplitBounds(ReadArrayFile(dir / (stem + ".max.npy")), orders, ref.channels[l]));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("Gram reference: ") + e.what());
  }
  return ref;
}

}  // namespace oodgate
