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

#include "hspose/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>

namespace hspose {
namespace {

constexpr Index kLeafSize = 12;

struct Candidate {
  double sq = 0.0;
  Index id = 0;
};

inline bool closer(const Candidate& a, const Candidate& b) {
  return a.sq < b.sq || (a.sq == b.sq && a.id < b.id);
}

// Shared by the brute-force and kd-tree paths so both produce bit-identical
// distances: a left-to-right sum of squared coordinate differences.
inline double squared_distance(const double* a, const double* b, Index dim) {
  double acc = 0.0;
  for (Index k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

void check_m(Index n, Index m) {
  if (m < 1 || m >= n) {
    throw std::invalid_argument("kNN: neighbor count m=" + std::to_string(m) +
                                " requires 1 <= m < N=" + std::to_string(n));
  }
}

}  // namespace

NeighborIndex::NeighborIndex(Index rows, Index m)
    : rows_(rows), m_(m), entries_(static_cast<std::size_t>(rows * m)) {}

void NeighborIndex::validate() const {
  for (Index i = 0; i < rows_; ++i) {
    const auto r = row(i);
    for (Index j = 0; j < m_; ++j) {
      const auto& e = r[static_cast<std::size_t>(j)];
      if (e.id == i) throw std::logic_error("NeighborIndex: row lists its own query point");
      if (e.id < 0 || e.id >= rows_) throw std::logic_error("NeighborIndex: id out of range");
      if (!(e.distance >= 0.0) || !std::isfinite(e.distance)) {
        throw std::logic_error("NeighborIndex: invalid distance");
      }
      if (j > 0 && e.distance < r[static_cast<std::size_t>(j - 1)].distance) {
        throw std::logic_error("NeighborIndex: distances not sorted");
      }
    }
  }
}

double point_distance(const Vec3& a, const Vec3& b) {
  return std::sqrt(squared_distance(a.data(), b.data(), 3));
}

double feature_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("feature_distance: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  return std::sqrt(squared_distance(a.data(), b.data(), static_cast<Index>(a.size())));
}

NeighborIndex knn_bruteforce(const RowMatrix& data, Index m) {
  const Index n = data.rows();
  const Index dim = data.cols();
  check_m(n, m);
  NeighborIndex index(n, m);
  std::vector<Candidate> scratch(static_cast<std::size_t>(n - 1));
  for (Index i = 0; i < n; ++i) {
    std::size_t k = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      scratch[k++] = {squared_distance(data.row(i).data(), data.row(j).data(), dim), j};
    }
    const auto mid = scratch.begin() + m;
    std::nth_element(scratch.begin(), mid - 1, scratch.end(), closer);
    std::sort(scratch.begin(), mid, closer);
    auto out = index.row(i);
    for (Index j = 0; j < m; ++j) {
      const auto& c = scratch[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(j)] = {c.id, std::sqrt(c.sq)};
    }
  }
  return index;
}

NeighborIndex knn_bruteforce(const PointCloud& cloud, Index m) {
  return knn_bruteforce(RowMatrix(cloud.points()), m);
}

KdTree::KdTree(const PointCloud& cloud) : points_(cloud.points()) {
  const Index n = points_.rows();
  order_.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order_[static_cast<std::size_t>(i)] = i;
  nodes_.reserve(static_cast<std::size_t>(2 * (n / kLeafSize + 1)));
  build(0, n);
}

Index KdTree::build(Index begin, Index end) {
  const auto node_id = static_cast<Index>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  if (end - begin <= kLeafSize) return node_id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (Index k = begin; k < end; ++k) {
    const Vec3 p = points_.row(order_[static_cast<std::size_t>(k)]).transpose();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return node_id;  // all coincident: stay a leaf

  const Index mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  std::nth_element(first, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
    const double pa = points_(a, axis), pb = points_(b, axis);
    return pa < pb || (pa == pb && a < b);
  });
  const double split = points_(order_[static_cast<std::size_t>(mid)], axis);

  const Index left = build(begin, mid);
  const Index right = build(mid, end);
  auto& node = nodes_[static_cast<std::size_t>(node_id)];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return node_id;
}

std::vector<Neighbor> KdTree::query(const Vec3& q, Index m, Index exclude) const {
  const Index available = size() - ((exclude >= 0 && exclude < size()) ? 1 : 0);
  if (m < 1 || m > available) {
    throw std::invalid_argument("KdTree::query: m=" + std::to_string(m) + " exceeds " +
                                std::to_string(available) + " candidate points");
  }
  auto worse = [](const Candidate& a, const Candidate& b) { return closer(a, b); };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> heap(worse);

  auto visit = [&](auto&& self, Index node_id) -> void {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.axis < 0) {
      for (Index k = node.begin; k < node.end; ++k) {
        const Index id = order_[static_cast<std::size_t>(k)];
        if (id == exclude) continue;
        const Candidate c{squared_distance(q.data(), points_.row(id).data(), 3), id};
        if (static_cast<Index>(heap.size()) < m) {
          heap.push(c);
        } else if (closer(c, heap.top())) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const Index near = diff < 0.0 ? node.left : node.right;
    const Index far = diff < 0.0 ? node.right : node.left;
    self(self, near);
    // Non-strict comparison keeps equal-distance points with smaller ids reachable.
    if (static_cast<Index>(heap.size()) < m || diff * diff <= heap.top().sq) self(self, far);
  };
  visit(visit, 0);

  std::vector<Neighbor> out(static_cast<std::size_t>(m));
  for (Index j = m - 1; j >= 0; --j) {
    out[static_cast<std::size_t>(j)] = {heap.top().id, std::sqrt(heap.top().sq)};
    heap.pop();
  }
  return out;
}

NeighborIndex KdTree::knn_all(Index m) const {
  check_m(size(), m);
  NeighborIndex index(size(), m);
  for (Index i = 0; i < size(); ++i) {
    const auto row = query(points_.row(i).transpose(), m, i);
    std::copy(row.begin(), row.end(), index.row(i).begin());
  }
  return index;
}

NeighborIndex knn_points(const PointCloud& cloud, Index m) {
  check_m(cloud.size(), m);
  return KdTree(cloud).knn_all(m);
}

NeighborIndex knn_features(const FeatureMap& features, Index m) { return knn_bruteforce(features, m); }

}  // namespace hspose
