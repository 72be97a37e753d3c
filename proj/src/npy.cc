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

#include "oodgate/npy.h"

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "oodgate/error.h"

static_assert(std::endian::native == std::endian::little,
              "array payloads are copied without byte swapping");

namespace oodgate {
namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicSize = 6;
constexpr std::size_t kPrefixSize = 10;  // magic + version + header length
constexpr std::size_t kAlignment = 64;

std::string Descr(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return "<f4";
    case DType::kFloat64: return "<f8";
    case DType::kInt64: return "<i8";
  }
  return "";
}

std::size_t ItemSize(DType dtype) { return dtype == DType::kFloat32 ? 4 : 8; }

std::string ShapeTuple(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  return out + ")";
}

// Value text following `'key':` in the header dictionary.
std::string_view DictValue(std::string_view header, std::string_view key) {
  const std::string quoted = "'" + std::string(key) + "'";
  std::size_t pos = header.find(quoted);
  Require(pos != std::string_view::npos, ErrorCode::kMalformed,
          "header lacks key " + quoted);
  pos = header.find(':', pos + quoted.size());
  Require(pos != std::string_view::npos, ErrorCode::kMalformed,
          "header key without value");
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  return header.substr(pos);
}

DType ParseDescr(std::string_view header) {
  std::string_view v = DictValue(header, "descr");
  Require(!v.empty() && (v[0] == '\'' || v[0] == '"'), ErrorCode::kMalformed,
          "descr is not a string");
  const char quote = v[0];
  const std::size_t end = v.find(quote, 1);
  Require(end != std::string_view::npos, ErrorCode::kMalformed,
          "unterminated descr");
  const std::string_view descr = v.substr(1, end - 1);
  if (descr == "<f4") return DType::kFloat32;
  if (descr == "<f8") return DType::kFloat64;
  if (descr == "<i8") return DType::kInt64;
  throw Error(ErrorCode::kUnsupportedDtype,
              "descr '" + std::string(descr) + "'");
}

bool ParseFortranOrder(std::string_view header) {
  std::string_view v = DictValue(header, "fortran_order");
  if (v.starts_with("False")) return false;
  if (v.starts_with("True")) return true;
  throw Error(ErrorCode::kMalformed, "fortran_order is not a boolean");
}

Shape ParseShape(std::string_view header) {
  std::string_view v = DictValue(header, "shape");
  Require(!v.empty() && v[0] == '(', ErrorCode::kMalformed,
          "shape is not a tuple");
  const std::size_t close = v.find(')');
  Require(close != std::string_view::npos, ErrorCode::kMalformed,
          "unterminated shape tuple");
  Shape shape;
  std::size_t i = 1;
  while (i < close) {
    while (i < close && (v[i] == ' ' || v[i] == ',')) ++i;
    if (i >= close) break;
    Require(std::isdigit(static_cast<unsigned char>(v[i])) != 0,
            ErrorCode::kMalformed, "non-numeric shape extent");
    std::size_t extent = 0;
    while (i < close && std::isdigit(static_cast<unsigned char>(v[i])) != 0) {
      extent = extent * 10 + static_cast<std::size_t>(v[i] - '0');
      ++i;
    }
    shape.push_back(extent);
  }
  return shape;
}

}  // namespace

std::string EncodeArray(const Tensor& t) {
  std::string dict = "{'descr': '" + Descr(t.dtype()) +
                     "', 'fortran_order': False, 'shape': " +
                     ShapeTuple(t.shape()) + ", }";
  // Pad with spaces so prefix + dict + '\n' is a multiple of 64.
  const std::size_t unpadded = kPrefixSize + dict.size() + 1;
  const std::size_t padded = (unpadded + kAlignment - 1) / kAlignment * kAlignment;
  dict.append(padded - unpadded, ' ');
  dict.push_back('\n');

  const std::size_t header_len = dict.size();
  std::string out;
  out.reserve(kPrefixSize + header_len + t.size() * ItemSize(t.dtype()));
  out.append(kMagic, kMagicSize);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header_len & 0xff));
  out.push_back(static_cast<char>((header_len >> 8) & 0xff));
  out += dict;

  switch (t.dtype()) {
    case DType::kFloat32:
      for (double v : t.values()) {
        const float f = static_cast<float>(v);
        out.append(reinterpret_cast<const char*>(&f), sizeof(f));
      }
      break;
    case DType::kFloat64:
      out.append(reinterpret_cast<const char*>(t.values().data()),
                 t.values().size() * sizeof(double));
      break;
    case DType::kInt64:
      out.append(reinterpret_cast<const char*>(t.int_values().data()),
                 t.int_values().size() * sizeof(std::int64_t));
      break;
  }
  return out;
}

Tensor DecodeArray(std::string_view bytes) {
  Require(bytes.size() >= kPrefixSize &&
              std::memcmp(bytes.data(), kMagic, kMagicSize) == 0,
          ErrorCode::kMalformed, "missing array magic");
  Require(bytes[6] == '\x01' && bytes[7] == '\x00', ErrorCode::kMalformed,
          "only format version 1.0 is supported");
  const std::size_t header_len =
      static_cast<unsigned char>(bytes[8]) |
      (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  Require(bytes.size() >= kPrefixSize + header_len, ErrorCode::kMalformed,
          "truncated header");
  const std::string_view header = bytes.substr(kPrefixSize, header_len);
  Require(!header.empty() && header.front() == '{', ErrorCode::kMalformed,
          "header is not a dictionary");

  const DType dtype = ParseDescr(header);
  Require(!ParseFortranOrder(header), ErrorCode::kUnsupportedLayout,
          "column-major arrays are not supported");
  Shape shape = ParseShape(header);

  const std::size_t count = NumElements(shape);
  const std::string_view payload = bytes.substr(kPrefixSize + header_len);
  Require(payload.size() == count * ItemSize(dtype), ErrorCode::kMalformed,
          "payload holds " + std::to_string(payload.size()) +
              " bytes, shape " + ShapeString(shape) + " needs " +
              std::to_string(count * ItemSize(dtype)));

  switch (dtype) {
    case DType::kFloat32: {
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i) {
        float f;
        std::memcpy(&f, payload.data() + i * 4, 4);
        values[i] = f;
      }
      return Tensor(std::move(shape), std::move(values), DType::kFloat32);
    }
    case DType::kFloat64: {
      std::vector<double> values(count);
      if (count > 0) std::memcpy(values.data(), payload.data(), count * 8);
      return Tensor(std::move(shape), std::move(values), DType::kFloat64);
    }
    case DType::kInt64: {
      std::vector<std::int64_t> values(count);
      if (count > 0) std::memcpy(values.data(), payload.data(), count * 8);
      return Tensor::FromInt64(std::move(shape), std::move(values));
    }
  }
  throw Error(ErrorCode::kUnsupportedDtype, "unreachable");
}

Tensor ReadArrayFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIoFailure, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return DecodeArray(bytes);
}

void WriteArrayFile(const Tensor& t, const std::filesystem::path& path) {
  const std::string bytes = EncodeArray(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorCode::kIoFailure, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  Require(out.good(), ErrorCode::kIoFailure, "short write to " + path.string());
}

}  // namespace oodgate
