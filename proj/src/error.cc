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

#include "oodgate/error.h"

namespace oodgate {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::kUnsupportedLayout: return "UnsupportedLayout";
    case ErrorCode::kMalformed: return "Malformed";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kNotAFeatureLayer: return "NotAFeatureLayer";
    case ErrorCode::kUnsupportedLayerForLrp: return "UnsupportedLayerForLRP";
    case ErrorCode::kEmptySamples: return "EmptySamples";
    case ErrorCode::kMissingFitStatistics: return "MissingFitStatistics";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kClassUnderpopulated: return "ClassUnderpopulated";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kMissingLayer: return "MissingLayer";
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kClassMissingInReference: return "ClassMissingInReference";
    case ErrorCode::kEmptyClassOfScores: return "EmptyClassOfScores";
    case ErrorCode::kEmptyScores: return "EmptyScores";
    case ErrorCode::kSeedCountMismatch: return "SeedCountMismatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kArtefactOverlapsSignal: return "ArtefactOverlapsSignal";
    case ErrorCode::kSourceOverlapsMask: return "SourceOverlapsMask";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kMissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

}  // namespace oodgate
