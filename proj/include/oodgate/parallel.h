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

#ifndef OODGATE_PARALLEL_H_
#define OODGATE_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace oodgate {

// Worker count: OODGATE_THREADS when set and positive, otherwise the
// hardware concurrency.
std::size_t ThreadCount();

// Runs body(i) for i in [0, n). Each index is handled exactly once; results
// must be written to per-index slots so output never depends on scheduling.
// The first exception thrown by any body is rethrown on the caller.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace oodgate

#endif  // OODGATE_PARALLEL_H_
