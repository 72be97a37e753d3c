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

#ifndef OODGATE_TENSOR_H_
#define OODGATE_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace oodgate {

enum class DType { kFloat32, kFloat64, kInt64 };

std::string DTypeName(DType dtype);

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

// Dense row-major array. Floating-point storage is always double; a float32
// tensor holds values that are exactly representable in float. int64 tensors
// keep their own integer storage so values beyond 2^53 survive round trips.
class Tensor {
 public:
  // Rank-0 float64 zero.
  Tensor();
  explicit Tensor(Shape shape, DType dtype = DType::kFloat64);
  Tensor(Shape shape, std::vector<double> values,
         DType dtype = DType::kFloat64);

  static Tensor Scalar(double value);
  static Tensor Vector(std::vector<double> values);
  static Tensor FromInt64(Shape shape, std::vector<std::int64_t> values);

  const Shape& shape() const { return shape_; }
  DType dtype() const { return dtype_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const;
  bool is_integer() const { return dtype_ == DType::kInt64; }

  // Element access as float64 regardless of storage dtype.
  double at(std::size_t i) const;

  // Floating storage. Empty for int64 tensors.
  std::span<const double> values() const { return real_; }
  std::span<double> mutable_values() { return real_; }
  // Floating tensors only.
  double& operator[](std::size_t i) { return real_[i]; }
  double operator[](std::size_t i) const {
    return dtype_ == DType::kInt64 ? static_cast<double>(integer_[i]) : real_[i];
  }

  std::span<const std::int64_t> int_values() const { return integer_; }

  // All elements widened to float64.
  std::vector<double> ToDoubles() const;

  // Same data, new shape with equal element count.
  Tensor Reshaped(Shape shape) const;

  // Re-rounds every value through float when switching to float32.
  Tensor WithDType(DType dtype) const;

  // Bit-exact equality: shape, dtype and the bit pattern of every element.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Shape shape_;
  DType dtype_ = DType::kFloat64;
  std::vector<double> real_;
  std::vector<std::int64_t> integer_;
};

}  // namespace oodgate

#endif  // OODGATE_TENSOR_H_
