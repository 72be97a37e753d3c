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

// NPY v1.0 array files, restricted to little-endian C-order arrays of
// dtype <f4, <f8 or <i8. Anything else is rejected rather than converted.

#ifndef OODGATE_NPY_H_
#define OODGATE_NPY_H_

#include <filesystem>
#include <string>
#include <string_view>

#include "oodgate/tensor.h"

namespace oodgate {

// Bytes of a complete array file, identical to what numpy.save emits.
std::string EncodeArray(const Tensor& t);
Tensor DecodeArray(std::string_view bytes);

Tensor ReadArrayFile(const std::filesystem::path& path);
void WriteArrayFile(const Tensor& t, const std::filesystem::path& path);

}  // namespace oodgate

#endif  // OODGATE_NPY_H_
