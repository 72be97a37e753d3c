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

#include "oodgate/tensor.h"

#include <bit>
#include <utility>

#include "oodgate/error.h"

namespace oodgate {

std::string DTypeName(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return "float32";
    case DType::kFloat64: return "float64";
    case DType::kInt64: return "int64";
  }
  return "unknown";
}

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor() : real_(1, 0.0) {}

Tensor::Tensor(Shape shape, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype) {
  if (dtype_ == DType::kInt64) {
    integer_.assign(NumElements(shape_), 0);
  } else {
    real_.assign(NumElements(shape_), 0.0);
  }
}

Tensor::Tensor(Shape shape, std::vector<double> values, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype) {
  Require(NumElements(shape_) == values.size(), ErrorCode::kShapeMismatch,
          "shape " + ShapeString(shape_) + " does not hold " +
              std::to_string(values.size()) + " elements");
  if (dtype_ == DType::kInt64) {
    integer_.reserve(values.size());
    for (double v : values) integer_.push_back(static_cast<std::int64_t>(v));
  } else {
    real_ = std::move(values);
    if (dtype_ == DType::kFloat32) {
      for (double& v : real_) v = static_cast<double>(static_cast<float>(v));
    }
  }
}

Tensor Tensor::Scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::Vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::FromInt64(Shape shape, std::vector<std::int64_t> values) {
  Require(NumElements(shape) == values.size(), ErrorCode::kShapeMismatch,
          "shape " + ShapeString(shape) + " does not hold " +
              std::to_string(values.size()) + " elements");
  Tensor t;
  t.shape_ = std::move(shape);
  t.dtype_ = DType::kInt64;
  t.real_.clear();
  t.integer_ = std::move(values);
  return t;
}

std::size_t Tensor::size() const {
  return dtype_ == DType::kInt64 ? integer_.size() : real_.size();
}

double Tensor::at(std::size_t i) const {
  return dtype_ == DType::kInt64 ? static_cast<double>(integer_[i]) : real_[i];
}

std::vector<double> Tensor::ToDoubles() const {
  if (dtype_ != DType::kInt64) return real_;
  std::vector<double> out;
  out.reserve(integer_.size());
  for (std::int64_t v : integer_) out.push_back(static_cast<double>(v));
  return out;
}

Tensor Tensor::Reshaped(Shape shape) const {
  Require(NumElements(shape) == size(), ErrorCode::kShapeMismatch,
          "cannot reshape " + ShapeString(shape_) + " to " + ShapeString(shape));
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::WithDType(DType dtype) const {
  if (dtype == dtype_) return *this;
  if (dtype == DType::kInt64) {
    std::vector<std::int64_t> ints;
    ints.reserve(real_.size());
    for (double v : real_) ints.push_back(static_cast<std::int64_t>(v));
    return FromInt64(shape_, std::move(ints));
  }
  return Tensor(shape_, ToDoubles(), dtype);
}

bool operator==(const Tensor& a, const Tensor& b) {
  if (a.shape_ != b.shape_ || a.dtype_ != b.dtype_) return false;
  if (a.dtype_ == DType::kInt64) return a.integer_ == b.integer_;
  if (a.real_.size() != b.real_.size()) return false;
  for (std::size_t i = 0; i < a.real_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.real_[i]) !=
        std::bit_cast<std::uint64_t>(b.real_[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace oodgate
