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

#ifndef OODGATE_ERROR_H_
#define OODGATE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace oodgate {

enum class ErrorCode {
  // tensor-io
  kUnsupportedDtype,
  kUnsupportedLayout,
  kMalformed,
  kIoFailure,
  kSchemaMismatch,
  kInvariantViolation,
  // model-engine
  kShapeMismatch,
  kNonFiniteActivation,
  kDivergedLoss,
  kNotAFeatureLayer,
  kUnsupportedLayerForLrp,
  // detectors
  kEmptySamples,
  kMissingFitStatistics,
  kSingularCovariance,
  kClassUnderpopulated,
  kDimensionMismatch,
  kMissingLayer,
  kEmptyClass,
  kClassMissingInReference,
  // eval-harness
  kEmptyClassOfScores,
  kEmptyScores,
  kSeedCountMismatch,
  // bench-synth
  kInvalidSpec,
  kArtefactOverlapsSignal,
  kSourceOverlapsMask,
  kOutOfBounds,
  // cli
  kInvalidConfig,
  kMissingArtifact,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure surfaced by the library is an Error carrying a stable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace oodgate

#endif  // OODGATE_ERROR_H_
