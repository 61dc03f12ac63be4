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

#ifndef HSPOSE_NEIGHBORS_HPP
#define HSPOSE_NEIGHBORS_HPP

#include <memory>
#include <span>
#include <vector>

#include "hspose/common.hpp"
#include "hspose/pointcloud.hpp"

namespace hspose {

struct Neighbor {
  Index id = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// For each of N query points, its M nearest other points ordered by
/// ascending (distance, id). The query point itself is never listed.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  NeighborIndex(Index rows, Index m);

  Index rows() const { return rows_; }
  Index m() const { return m_; }

  std::span<const Neighbor> row(Index i) const {
    return {entries_.data() + i * m_, static_cast<std::size_t>(m_)};
  }
  std::span<Neighbor> row(Index i) { return {entries_.data() + i * m_, static_cast<std::size_t>(m_)}; }
  Index id(Index i, Index j) const { return entries_[static_cast<std::size_t>(i * m_ + j)].id; }

  /// Throws std::logic_error if any row breaks the ordering/self-exclusion rules.
  void validate() const;

  friend bool operator==(const NeighborIndex&, const NeighborIndex&) = default;

 private:
  Index rows_ = 0;
  Index m_ = 0;
  std::vector<Neighbor> entries_;
};

enum class NeighborMetric { point, feature };

/// Euclidean distance between positions (RF-P metric).
double point_distance(const Vec3& a, const Vec3& b);

/// Euclidean distance between feature vectors (RF-F metric).
double feature_distance(std::span<const double> a, std::span<const double> b);

/// Exact kNN by exhaustive scan over the rows of `data` (N x D). Each row is
/// both a query and a candidate. Ties are broken by ascending id.
NeighborIndex knn_bruteforce(const RowMatrix& data, Index m);
NeighborIndex knn_bruteforce(const PointCloud& cloud, Index m);

/// Exact 3D kNN index (median-split kd-tree). Immutable after construction;
/// queries are safe from multiple threads.
class KdTree {
 public:
  explicit KdTree(const PointCloud& cloud);

  Index size() const { return static_cast<Index>(order_.size()); }

  /// The m nearest points to `query`, skipping index `exclude` (pass -1 to
  /// keep all). Same ordering and distance arithmetic as knn_bruteforce.
  std::vector<Neighbor> query(const Vec3& query, Index m, Index exclude = -1) const;

  /// All-points kNN with self excluded; requires m < N.
  NeighborIndex knn_all(Index m) const;

 private:
  struct Node {
    Index begin = 0;
    Index end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    Index left = -1;
    Index right = -1;
  };

  Index build(Index begin, Index end);

  Points3 points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

/// RF-P receptive fields through the kd-tree.
NeighborIndex knn_points(const PointCloud& cloud, Index m);

/// RF-F receptive fields: exhaustive search over feature rows.
NeighborIndex knn_features(const FeatureMap& features, Index m);

}  // namespace hspose

#endif  // HSPOSE_NEIGHBORS_HPP
