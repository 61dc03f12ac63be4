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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hspose/neighbors.hpp"
#include "support.hpp"

using namespace hspose;

namespace {

// Full sort of every candidate by (squared distance, id).
NeighborIndex sort_oracle(const RowMatrix& data, Index m) {
  const Index n = data.rows();
  NeighborIndex out(n, m);
  for (Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, Index>> cand;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (Index k = 0; k < data.cols(); ++k) {
        const double diff = data(i, k) - data(j, k);
        d2 += diff * diff;
      }
      cand.emplace_back(d2, j);
    }
    std::sort(cand.begin(), cand.end());
    for (Index j = 0; j < m; ++j) out.row(i)[static_cast<std::size_t>(j)] = {cand[static_cast<std::size_t>(j)].second,
                                                                             std::sqrt(cand[static_cast<std::size_t>(j)].first)};
  }
  return out;
}

bool same_ids(const NeighborIndex& a, const NeighborIndex& b) {
  if (a.rows() != b.rows() || a.m() != b.m()) return false;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.m(); ++j)
      if (a.id(i, j) != b.id(i, j)) return false;
  return true;
}

}  // namespace

TEST_CASE("distances") {
  CHECK(point_distance(Vec3::Zero(), Vec3::Zero()) == 0.0);
  CHECK(point_distance(Vec3::Zero(), Vec3(3, 4, 0)) == 5.0);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 a = rng.unit_vector() * rng.uniform(0, 5), b = rng.unit_vector();
    CHECK(point_distance(a, b) == point_distance(b, a));
  }
  const std::vector<double> f1{1, 0}, f2{0, 1}, ones{1, 1, 1};
  CHECK(feature_distance(f1, f2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(feature_distance(ones, ones) == 0.0);
  CHECK_THROWS_AS(feature_distance(f1, ones), ShapeError);
}

TEST_CASE("collinear hand case") {
  Points3 p(3, 3);
  p << 0, 0, 0, 1, 0, 0, 3, 0, 0;
  const PointCloud pc(p);
  for (const auto& idx : {knn_bruteforce(pc, 1), knn_points(pc, 1)}) {
    CHECK(idx.id(0, 0) == 1);
    CHECK(idx.id(1, 0) == 0);
    CHECK(idx.id(2, 0) == 1);
    CHECK(idx.row(2)[0].distance == 2.0);
  }
}

TEST_CASE("identical points fall back to id order") {
  const PointCloud pc(Points3::Constant(5, 3, 0.25));
  for (const auto& idx : {knn_bruteforce(pc, 2), knn_points(pc, 2)}) {
    CHECK(idx.id(0, 0) == 1);
    CHECK(idx.id(0, 1) == 2);
    CHECK(idx.id(3, 0) == 0);
    CHECK(idx.id(3, 1) == 1);
    CHECK(idx.row(4)[1].distance == 0.0);
  }
}

TEST_CASE("brute force matches the sort oracle") {
  Rng rng(4);
  const auto pc = test::random_cloud(200, rng);
  const auto bf = knn_bruteforce(pc, 10);
  const auto oracle = sort_oracle(RowMatrix(pc.points()), 10);
  CHECK(same_ids(bf, oracle));
  for (Index i = 0; i < bf.rows(); ++i)
    for (Index j = 0; j < bf.m(); ++j) CHECK(bf.row(i)[static_cast<std::size_t>(j)].distance ==
                                             doctest::Approx(oracle.row(i)[static_cast<std::size_t>(j)].distance).epsilon(1e-14));
  bf.validate();
}

TEST_CASE("kd-tree equals brute force exactly") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 10 + static_cast<Index>(rng.below(600));
    const Index m = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min<Index>(n - 1, 30))));
    auto pc = test::random_cloud(n, rng);
    if (trial % 4 == 0) {
      // Grid-snapped coordinates produce many exact distance ties and duplicates.
      Points3 snapped = (pc.points() * 4.0).array().round() / 4.0;
      pc = PointCloud(snapped);
    }
    CHECK(knn_points(pc, m) == knn_bruteforce(pc, m));
  }
}

TEST_CASE("kd-tree single queries") {
  Rng rng(6);
  const auto pc = test::random_cloud(300, rng);
  const KdTree tree(pc);
  CHECK(tree.size() == 300);
  const Vec3 q(0.1, -0.2, 0.3);
  const auto got = tree.query(q, 7);
  RowMatrix all(301, 3);
  all.topRows(300) = pc.points();
  all.row(300) = q.transpose();
  const auto oracle = sort_oracle(all, 7);
  REQUIRE(got.size() == 7);
  for (Index j = 0; j < 7; ++j) CHECK(got[static_cast<std::size_t>(j)].id == oracle.id(300, j));
  const auto excl = tree.query(pc.point(3), 1, 3);
  CHECK(excl.front().id != 3);
}

TEST_CASE("invalid neighbor counts") {
  const PointCloud one(Points3::Zero(1, 3));
  CHECK_THROWS_AS(knn_points(one, 1), std::invalid_argument);
  CHECK_THROWS_AS(knn_bruteforce(one, 1), std::invalid_argument);
  Rng rng(1);
  const auto pc = test::random_cloud(5, rng);
  CHECK_THROWS_AS(knn_points(pc, 5), std::invalid_argument);
  CHECK_THROWS_AS(knn_points(pc, 0), std::invalid_argument);
  CHECK_NOTHROW(knn_points(pc, 4));
}

TEST_CASE("feature-metric receptive fields") {
  RowMatrix f(3, 2);
  f << 1, 1, 5, 5, 1, 1;  // rows 0 and 2 far apart in space would still pair up
  const auto idx = knn_features(f, 1);
  CHECK(idx.id(0, 0) == 2);
  CHECK(idx.id(2, 0) == 0);

  Rng rng(2);
  const auto pc = test::random_cloud(30, rng);
  const auto ones = knn_features(RowMatrix::Ones(30, 1), 4);
  for (Index i = 0; i < 30; ++i)
    for (Index j = 0; j < 4; ++j) CHECK(ones.row(i)[static_cast<std::size_t>(j)].distance == 0.0);
  CHECK(ones == knn_bruteforce(RowMatrix::Ones(30, 1), 4));
  CHECK(ones.id(0, 0) == 1);
  CHECK(ones.id(5, 3) == 3);

  const auto feats = test::random_matrix(128, 16, rng);
  CHECK(same_ids(knn_features(feats, 10), sort_oracle(feats, 10)));
}

TEST_CASE("receptive fields survive translation, scaling and permutation") {
  Rng rng(3);
  const auto pc = test::random_cloud(150, rng);
  const auto base = knn_points(pc, 8);
  Points3 moved = (pc.points() * 37.0).rowwise() + Eigen::RowVector3d(4, -9, 2);
  CHECK(same_ids(knn_points(PointCloud(moved), 8), base));

  const auto perm = sample_without_replacement(150, 150, rng);
  std::vector<Index> inverse(150);
  Points3 shuffled(150, 3);
  for (Index i = 0; i < 150; ++i) {
    shuffled.row(i) = pc.points().row(perm[static_cast<std::size_t>(i)]);
    inverse[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;
  }
  const auto permuted = knn_points(PointCloud(shuffled), 8);
  for (Index i = 0; i < 150; ++i)
    for (Index j = 0; j < 8; ++j)
      CHECK(permuted.id(i, j) == inverse[static_cast<std::size_t>(base.id(perm[static_cast<std::size_t>(i)], j))]);
}
