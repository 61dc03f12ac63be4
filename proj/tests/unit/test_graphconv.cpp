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

#include "hspose/graphconv.hpp"
#include "support.hpp"

using namespace hspose;

namespace {

// Direct evaluation of the kernel formula with an exhaustive max.
FeatureMap gc_oracle(const PointCloud& pc, const FeatureMap& f, const NeighborIndex& nbrs, const GCLayer& layer) {
  FeatureMap out(pc.size(), layer.d_out);
  for (Index n = 0; n < pc.size(); ++n) {
    for (Index c = 0; c < layer.d_out; ++c) {
      const auto& k = layer.kernels[static_cast<std::size_t>(c)];
      double v = 0.0;
      for (Index d = 0; d < layer.d_in; ++d) v += f(n, d) * k.center_weights[d];
      for (Index s = 0; s < layer.support; ++s) {
        double best = -1e300;
        for (Index j = 0; j < nbrs.m(); ++j) {
          const Index m = nbrs.id(n, j);
          const Vec3 off = pc.point(m) - pc.point(n);
          const Vec3 dir = k.support_dirs.row(s).transpose();
          const double cosine = off.norm() < 1e-12 ? 0.0 : off.dot(dir) / (off.norm() * dir.norm());
          double resp = 0.0;
          for (Index d = 0; d < layer.d_in; ++d) resp += f(m, d) * k.support_weights(s, d);
          best = std::max(best, resp * cosine);
        }
        v += best;
      }
      out(n, c) = v;
    }
  }
  return out;
}

double max_abs(const FeatureMap& a, const FeatureMap& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("similarity hand values") {
  const std::vector<double> f{2.0}, w{3.0};
  CHECK(similarity(Vec3::Zero(), Vec3(1, 1, 0), f, Vec3(1, 0, 0), w) == doctest::Approx(6.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(similarity(Vec3::Zero(), Vec3(2, 0, 0), f, Vec3(5, 0, 0), w) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(similarity(Vec3::Zero(), Vec3(0, 2, 0), f, Vec3(1, 0, 0), w) == 0.0);
  CHECK(similarity(Vec3(1, 1, 1), Vec3(1, 1, 1), f, Vec3(1, 0, 0), w) == 0.0);
}

TEST_CASE("layer validation") {
  Rng rng(1);
  auto layer = GCLayer::random(3, 4, 2, rng);
  CHECK_NOTHROW(layer.validate());
  CHECK(layer.kernels.size() == 4);
  for (const auto& k : layer.kernels)
    for (Index s = 0; s < 2; ++s) CHECK(std::abs(k.support_dirs.row(s).norm() - 1.0) < 1e-12);
  layer.kernels[1].support_dirs.row(0).setZero();
  CHECK_THROWS_AS(layer.validate(), std::invalid_argument);
  layer.enforce_support_norms();
  CHECK(layer.kernels[1].support_dirs.row(0).norm() >= kMinSupportNorm);
  CHECK_NOTHROW(layer.validate());
  layer.kernels[2].center_weights.resize(2);
  CHECK_THROWS(layer.validate());
}

TEST_CASE("gc_forward hand instance") {
  // N=4 on a line, M=2, S=1, D_in=D_out=1.
  Points3 p(4, 3);
  p << 0, 0, 0, 1, 0, 0, 3, 0, 0, 0, 2, 0;
  const PointCloud pc(p);
  FeatureMap f(4, 1);
  f << 1.0, -2.0, 0.5, 4.0;
  GCLayer layer = GCLayer::zeros(1, 1, 1);
  layer.kernels[0].center_weights << 0.5;
  layer.kernels[0].support_dirs << 1.0, 0.0, 0.0;
  layer.kernels[0].support_weights << 2.0;
  const auto nbrs = knn_bruteforce(pc, 2);
  const auto out = gc_forward(pc, f, nbrs, layer).output;
  // point 0: neighbors 1 (d=(1,0,0)), 3 (d=(0,2,0)); responses -4*1, 8*0 -> max 0
  CHECK(out(0, 0) == doctest::Approx(0.5));
  // point 1: neighbors 0 (d=(-1,0,0)), 2 (d=(2,0,0)); 2*(-1), 1*1 -> 1
  CHECK(out(1, 0) == doctest::Approx(-1.0 + 1.0));
  CHECK(max_abs(out, gc_oracle(pc, f, nbrs, layer)) < 1e-14);
}

TEST_CASE("gc_forward matches the direct oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pc = test::random_cloud(40, rng);
    const auto f = test::random_matrix(40, 3, rng);
    const auto layer = GCLayer::random(3, 5, 1 + trial % 3, rng);
    const auto nbrs = knn_points(pc, 6);
    CHECK(max_abs(gc_forward(pc, f, nbrs, layer).output, gc_oracle(pc, f, nbrs, layer)) < 1e-12);
  }
}

TEST_CASE("no supports leaves the centre term") {
  Rng rng(3);
  const auto pc = test::random_cloud(20, rng);
  const auto f = test::random_matrix(20, 3, rng);
  auto layer = GCLayer::random(3, 4, 0, rng);
  RowMatrix wc(3, 4);
  for (Index c = 0; c < 4; ++c) wc.col(c) = layer.kernels[static_cast<std::size_t>(c)].center_weights;
  const auto nbrs = knn_points(pc, 3);
  const auto fwd = gc_forward(pc, f, nbrs, layer);
  CHECK(max_abs(fwd.output, f * wc) < 1e-14);
  CHECK(gc_forward(pc, FeatureMap::Zero(20, 3), nbrs, GCLayer::random(3, 4, 2, rng)).output.isZero(0.0));

  const auto g = test::random_matrix(20, 4, rng);
  const auto back = gc_backward(pc, f, nbrs, layer, fwd, g);
  CHECK(max_abs(back.grad_features, g * wc.transpose()) < 1e-14);
  for (Index c = 0; c < 4; ++c) {
    const Eigen::VectorXd expect = f.transpose() * g.col(c);
    CHECK((back.grad_layer.kernels[static_cast<std::size_t>(c)].center_weights - expect).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("duplicate points contribute no direction") {
  Points3 p = Points3::Zero(3, 3);
  p.row(2) << 1, 0, 0;
  const PointCloud pc(p);
  FeatureMap f = FeatureMap::Ones(3, 1);
  GCLayer layer = GCLayer::zeros(1, 1, 1);
  layer.kernels[0].support_dirs << 1, 0, 0;
  layer.kernels[0].support_weights << -1.0;
  const auto out = gc_forward(pc, f, knn_bruteforce(pc, 1), layer).output;
  // point 0's only neighbor is its duplicate, point 1
  CHECK(out(0, 0) == 0.0);
}

TEST_CASE("geometric invariances with fixed topology") {
  Rng rng(4);
  const auto pc = test::random_cloud(64, rng);
  const auto f = test::random_matrix(64, 2, rng);
  const auto layer = GCLayer::random(2, 4, 2, rng);
  const auto nbrs = knn_points(pc, 5);
  const auto base = gc_forward(pc, f, nbrs, layer).output;
  for (int i = 0; i < 20; ++i) {
    const double scale = std::exp(rng.uniform(std::log(0.01), std::log(100.0)));
    const Vec3 t = rng.unit_vector() * rng.uniform(0, 10);
    Points3 q = (pc.points() * scale).rowwise() + t.transpose();
    CHECK(max_abs(gc_forward(PointCloud(q), f, nbrs, layer).output, base) <= 1e-9);
  }
  const auto perm = sample_without_replacement(64, 64, rng);
  Points3 q(64, 3);
  FeatureMap fq(64, 2);
  for (Index i = 0; i < 64; ++i) {
    q.row(i) = pc.points().row(perm[static_cast<std::size_t>(i)]);
    fq.row(i) = f.row(perm[static_cast<std::size_t>(i)]);
  }
  const PointCloud qc(q);
  const auto out = gc_forward(qc, fq, knn_points(qc, 5), layer).output;
  for (Index i = 0; i < 64; ++i) CHECK((out.row(i) - base.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gc_backward matches central differences") {
  Rng rng(5);
  const auto pc = test::random_cloud(16, rng);
  FeatureMap f = test::random_matrix(16, 4, rng);
  GCLayer layer = GCLayer::random(4, 3, 2, rng);
  const auto nbrs = knn_points(pc, 3);
  const auto g = test::random_matrix(16, 3, rng);

  const auto fwd = gc_forward(pc, f, nbrs, layer);
  CHECK(gc_backward(pc, f, nbrs, layer, fwd, FeatureMap::Zero(16, 3)).grad_features.isZero(0.0));
  auto back = gc_backward(pc, f, nbrs, layer, fwd, g);

  test::Slots params, grads;
  params.add("features", f);
  grads.add("features", back.grad_features);
  for (std::size_t c = 0; c < layer.kernels.size(); ++c) {
    params.add("gc", layer.kernels[c].support_dirs);
    grads.add("gc", back.grad_layer.kernels[c].support_dirs);
    params.add("gc", layer.kernels[c].center_weights);
    grads.add("gc", back.grad_layer.kernels[c].center_weights);
    params.add("gc", layer.kernels[c].support_weights);
    grads.add("gc", back.grad_layer.kernels[c].support_weights);
  }
  const auto x0 = params.values();
  auto probe = [&](const std::vector<double>& x) {
    params.set(x);
    const auto r = gc_forward(pc, f, nbrs, layer);
    params.set(x0);
    return Probe{(r.output.array() * g.array()).sum(), test::hash_indices(0, r.argmax)};
  };
  GradcheckOptions opts;
  opts.tol = 1e-5;
  opts.samples_per_group = 1000;
  const auto report = gradcheck(probe, x0, grads.values(), params.groups, opts);
  CHECK(report.passed);
  CHECK(report.max_rel_err <= 1e-5);
  CHECK(report.checked > 100);
}

TEST_CASE("graph max pooling") {
  Rng rng(6);
  const auto pc = test::random_cloud(8, rng);
  const auto f = test::random_matrix(8, 3, rng);
  const NeighborIndex none(8, 0);
  const auto same = graph_max_pool(pc, f, none, 8, 1);
  CHECK(same.features == f);
  CHECK(same.cloud.points() == pc.points());

  const auto constant = graph_max_pool(pc, FeatureMap::Constant(8, 3, 2.5), knn_points(pc, 2), 4, 2);
  CHECK((constant.features.array() == 2.5).all());

  const auto nbrs = knn_points(pc, 2);
  const auto pooled = graph_max_pool(pc, f, nbrs, 4, 3);
  REQUIRE(pooled.selected.size() == 4);
  CHECK(std::is_sorted(pooled.selected.begin(), pooled.selected.end()));
  for (Index r = 0; r < 4; ++r) {
    const Index centre = pooled.selected[static_cast<std::size_t>(r)];
    CHECK(pooled.cloud.point(r) == pc.point(centre));
    for (Index c = 0; c < 3; ++c) {
      double best = f(centre, c);
      for (Index j = 0; j < 2; ++j) best = std::max(best, f(nbrs.id(centre, j), c));
      CHECK(pooled.features(r, c) == best);
    }
  }
  CHECK(graph_max_pool(pc, f, nbrs, 4, 3).selected == pooled.selected);

  const auto g = test::random_matrix(4, 3, rng);
  const auto back = graph_max_pool_backward(pooled, 8, g);
  CHECK(back.sum() == doctest::Approx(g.sum()));
  CHECK_THROWS(graph_max_pool(pc, f, nbrs, 9, 0));
}
