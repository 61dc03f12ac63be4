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

#ifndef HSPOSE_COMMON_HPP
#define HSPOSE_COMMON_HPP

#include <Eigen/Core>

#include <charconv>
#include <stdexcept>
#include <string>

namespace hspose {

using Index = Eigen::Index;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Row-major dense matrix; all learnable tensors and feature maps use it so
/// that flat storage order is row-major.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Dense N x D matrix of per-point features; row n is the feature of point n.
using FeatureMap = RowMatrix;

/// Malformed input text (PLY/XYZ/config/record files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 17 significant digits, so from_chars gives back the same double.
inline void append_real(std::string& out, double v) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.append(buf, result.ptr);
}

inline std::string format_real(double v) {
  std::string out;
  append_real(out, v);
  return out;
}

}  // namespace hspose

#endif  // HSPOSE_COMMON_HPP
