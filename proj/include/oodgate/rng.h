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

#ifndef OODGATE_RNG_H_
#define OODGATE_RNG_H_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace oodgate {

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// Key of an independent substream; order of derivation does not matter.
constexpr std::uint64_t DeriveStream(std::uint64_t seed, std::uint64_t stream) {
  return Mix64(seed ^ Mix64(stream + kGoldenGamma));
}

// FNV-1a, used to turn identifiers into stream ids.
constexpr std::uint64_t HashString(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based generator: the n-th draw is Mix64(key + n * gamma), so a
// stream is fully determined by its key and never by the draw order of any
// other stream.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t NextU64() {
    ++counter_;
    return Mix64(key_ + counter_ * kGoldenGamma);
  }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Integer in [0, n).
  std::uint64_t Below(std::uint64_t n) { return NextU64() % n; }

  // True with probability p. The comparison is on integers so the outcome
  // does not depend on floating-point rounding of the draw.
  bool Bernoulli(double p) {
    const auto threshold = static_cast<std::uint64_t>(p * 0x1.0p53);
    return (NextU64() >> 11) < threshold;
  }

  // Box-Muller, one value per call.
  double Normal() {
    double u1 = Uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace oodgate

#endif  // OODGATE_RNG_H_
