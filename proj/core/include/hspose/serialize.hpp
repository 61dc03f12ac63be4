// Copyright 2026 The hspose Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HSPOSE_SERIALIZE_HPP
#define HSPOSE_SERIALIZE_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hspose/common.hpp"

namespace hspose {

struct NamedTensor {
  std::string name;
  RowMatrix value;

  friend bool operator==(const NamedTensor& a, const NamedTensor& b) {
    return a.name == b.name && a.value.rows() == b.value.rows() && a.value.cols() == b.value.cols() &&
           a.value == b.value;
  }
};

// Binary parameter layout (all integers little-endian):
//
//   bytes 0..7   magic "HSPOSEW" followed by a NUL byte
//   u32          format version (1)
//   u32          tensor count T
//   T times:
//     u32        name length L, then L bytes of name (no terminator)
//     u64        rows
//     u64        cols
//     rows*cols  IEEE-754 binary64 values, little-endian, row-major
//
// Text layout (line oriented, for diffing):
//
//   hspose-tensors 1
//   tensor <name> <rows> <cols>
//   <cols values per line, 17 significant digits>   (rows lines)
//
// Both layouts round-trip every double bit-exactly.
inline constexpr std::uint32_t kTensorFormatVersion = 1;

void write_tensors_binary(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors_binary(std::istream& in);

void write_tensors_text(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors_text(std::istream& in);

enum class TensorFormat { binary, text };

void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors, TensorFormat format);
/// Detects the layout from the leading magic bytes.
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

}  // namespace hspose

#endif  // HSPOSE_SERIALIZE_HPP
