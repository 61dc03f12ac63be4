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

#ifndef HSPOSE_TESTS_SUPPORT_HPP
#define HSPOSE_TESTS_SUPPORT_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hspose/common.hpp"
#include "hspose/pointcloud.hpp"
#include "hspose/rng.hpp"
#include "hspose/training.hpp"

namespace hspose::test {

inline PointCloud random_cloud(Index n, Rng& rng, double half = 0.5) {
  Points3 pts(n, 3);
  for (Index i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) pts(i, k) = rng.uniform(-half, half);
  return PointCloud(std::move(pts));
}

inline RowMatrix random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  RowMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

inline std::uint64_t hash_indices(std::uint64_t h, const std::vector<Index>& v) {
  for (const Index x : v) {
    h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

/// Flat view over scattered tensors: parameters in one Slots, their
/// gradients in another filled in the same order.
struct Slots {
  std::vector<double*> ptrs;
  std::vector<CoordinateGroup> groups;

  void add(const std::string& group, double* data, Index count) {
    auto it = groups.begin();
    while (it != groups.end() && it->name != group) ++it;
    if (it == groups.end()) {
      groups.push_back({group, {}});
      it = std::prev(groups.end());
    }
    for (Index i = 0; i < count; ++i) {
      it->coords.push_back(static_cast<Index>(ptrs.size()));
      ptrs.push_back(data + i);
    }
  }
  template <typename M>
  void add(const std::string& group, M& m) {
    add(group, m.data(), m.size());
  }
  std::vector<double> values() const {
    std::vector<double> v;
    for (auto* p : ptrs) v.push_back(*p);
    return v;
  }
  void set(const std::vector<double>& v) const {
    for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = v[i];
  }
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hspose_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace hspose::test

#endif  // HSPOSE_TESTS_SUPPORT_HPP
