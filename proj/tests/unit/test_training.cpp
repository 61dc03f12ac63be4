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

#include <cmath>

#include "hspose/encoder_config.hpp"
#include "hspose/training.hpp"
#include "support.hpp"

using namespace hspose;

namespace {

Model small_model(std::uint64_t seed, Index width = 8) {
  auto spec = parse_encoder_spec("layers = " + std::to_string(width) + ", " + std::to_string(width) +
                                 "\nsupport = 2\nm_rff = 5\nm_orl = 5\n");
  Model m{build_encoder(spec, seed), {}};
  Rng rng(seed ^ 0x77);
  m.head = LinearMap::random(width, 3, rng);
  return m;
}

ParamVector plain(std::vector<double> v) { return ParamVector{std::move(v), {{"p", 1, 0}}}; }

}  // namespace

TEST_CASE("finite_diff_grad examples") {
  Rng rng(1);
  std::vector<double> v(7);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  auto p = plain(v);
  p.manifest[0].cols = 7;

  const auto zero = finite_diff_grad([](const ParamVector&) { return 3.5; }, p, 1e-5);
  for (double g : zero.values) CHECK(g == 0.0);

  const auto sq = finite_diff_grad(
      [](const ParamVector& q) {
        double s = 0.0;
        for (double x : q.values) s += x * x;
        return s;
      },
      p, 1e-4);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(sq.values[i] - 2.0 * v[i]) < 1e-9);

  CHECK_THROWS_AS(finite_diff_grad([](const ParamVector&) { return 1.0; }, p, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(finite_diff_grad([](const ParamVector&) { return std::nan(""); }, p, 1e-5), NonFiniteError);
}

TEST_CASE("relative error definition") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1e-10, 0.0) == doctest::Approx(1e-2));
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("flatten and assign round trip") {
  auto m = small_model(3);
  const auto p = flatten(m);
  Index total = 0;
  for (const auto& s : p.manifest) total += s.rows * s.cols;
  CHECK(total == p.size());
  CHECK(p.manifest.back().name == "head.bias");

  auto other = small_model(4);
  assign(other, p);
  CHECK(flatten(other).values == p.values);
  CHECK(predict(other, test::random_cloud(30, *std::make_unique<Rng>(1))) ==
        predict(m, test::random_cloud(30, *std::make_unique<Rng>(1))));

  CHECK(from_tensors(to_tensors(p)).values == p.values);
  CHECK(from_tensors(to_tensors(p)).manifest == p.manifest);

  auto wrong = p;
  wrong.values.pop_back();
  CHECK_THROWS(assign(other, wrong));
  CHECK(param_group("layer1.gc.k3.support_dirs") == "gc_support_dirs");
  CHECK(param_group("layer1.gc.k3.center_weights") == "gc_weights");
  CHECK(param_group("layer0.ste.bias") == "ste");
  CHECK(param_group("layer0.orl.weights") == "orl");
  CHECK(param_group("head.weights") == "head");
}

TEST_CASE("sgd_step examples") {
  auto p = plain({1.0, -2.0, 0.5});
  p.manifest[0].cols = 3;
  CHECK(sgd_step(p, p, 0.0).values == p.values);
  for (double x : sgd_step(p, p, 1.0).values) CHECK(x == 0.0);
  auto bad = p;
  bad.manifest[0].name = "q";
  CHECK_THROWS_AS(sgd_step(p, bad, 0.1), ShapeError);

  // f = |p|^2 / 2 has gradient p.
  auto q = p;
  int steps = 0;
  auto norm = [](const ParamVector& x) {
    double s = 0.0;
    for (double v : x.values) s += v * v;
    return std::sqrt(s);
  };
  while (norm(q) >= 1e-6 && steps < 200) {
    q = sgd_step(q, q, 0.1);
    ++steps;
  }
  CHECK(norm(q) < 1e-6);
  CHECK(steps <= 200);
}

TEST_CASE("model gradients") {
  Rng rng(5);
  const auto cloud = test::random_cloud(24, rng);
  const Vec3 label = Vec3(0.2, -0.5, 0.8).normalized();
  auto m = small_model(6);

  GradcheckOptions opts;
  opts.seed = 2;
  const auto full = gradcheck_model(m, cloud, label, opts);
  CHECK(full.passed);
  CHECK(full.max_rel_err <= 1e-4);
  CHECK(full.groups.size() == 5);
  for (const auto& g : full.groups) CHECK(g.checked > 0);

  SUBCASE("STE-only model at 1e-6") {
    for (auto& l : m.encoder.layers) {
      for (auto& k : l.gc.kernels) {
        k.center_weights.setZero();
        k.support_weights.setZero();
      }
      l.use_orl = false;
    }
    // With the geometric path zeroed every max is a tie, so only the affine tensors are probed.
    const auto lg = model_loss_and_grad(m, cloud, label);
    const auto topo = topology_of(lg.forward);
    std::vector<CoordinateGroup> groups;
    Index offset = 0;
    for (const auto& s : lg.grad.manifest) {
      const auto group = param_group(s.name);
      if (group == "ste" || group == "head") {
        CoordinateGroup g{s.name, {}};
        for (Index i = 0; i < s.rows * s.cols; ++i) g.coords.push_back(offset + i);
        groups.push_back(std::move(g));
      }
      offset += s.rows * s.cols;
    }
    REQUIRE(groups.size() == 6);
    Model probe_model = m;
    auto probe = [&](const std::vector<double>& x) {
      assign(probe_model, ParamVector{x, lg.grad.manifest});
      return Probe{model_loss(probe_model, cloud, label, &topo), 0};
    };
    opts.tol = 1e-6;
    opts.samples_per_group = 1000;
    const auto r = gradcheck(probe, flatten(m).values, lg.grad.values, groups, opts);
    CHECK(r.passed);
    CHECK(r.max_rel_err <= 1e-6);
  }

  SUBCASE("corrupted gradient fails") {
    const auto lg = model_loss_and_grad(m, cloud, label);
    auto analytic = lg.grad.values;
    const auto x0 = flatten(m).values;
    // Largest head-weight gradient, scaled by two.
    std::size_t offset = 0, worst = 0;
    for (const auto& s : lg.grad.manifest) {
      if (s.name == "head.weights")
        for (Index i = 0; i < s.rows * s.cols; ++i)
          if (std::abs(analytic[offset + static_cast<std::size_t>(i)]) > std::abs(analytic[worst]))
            worst = offset + static_cast<std::size_t>(i);
      offset += static_cast<std::size_t>(s.rows * s.cols);
    }
    analytic[worst] *= 2.0;
    const auto topo = topology_of(lg.forward);
    Model probe_model = m;
    auto probe = [&](const std::vector<double>& x) {
      assign(probe_model, ParamVector{x, lg.grad.manifest});
      return Probe{model_loss(probe_model, cloud, label, &topo), 0};
    };
    const auto r = gradcheck(probe, x0, analytic, {{"corrupt", {static_cast<Index>(worst)}}}, opts);
    CHECK(!r.passed);
    REQUIRE(r.failing.size() == 1);
    CHECK(r.failing[0].coord == static_cast<Index>(worst));
    CHECK(r.failing[0].rel_err == doctest::Approx(0.5).epsilon(1e-3));
  }
}

TEST_CASE("persistent ties abort the check") {
  // Every coordinate sits on a tie: any perturbation flips the signature.
  std::vector<double> x(8, 0.0);
  auto probe = [](const std::vector<double>& p) {
    std::uint64_t sig = 0;
    for (std::size_t i = 0; i < p.size(); ++i) sig |= static_cast<std::uint64_t>(p[i] > 0.0) << i;
    return Probe{p[0], sig};
  };
  GradcheckOptions opts;
  CHECK_THROWS_AS(gradcheck(probe, x, std::vector<double>(8, 0.0), {{"all", {0, 1, 2, 3, 4, 5, 6, 7}}}, opts),
                  TieProximityError);

  // A tie on a few coordinates is skipped and the rest are checked.
  x.assign(8, 1.0);
  x[2] = x[5] = 0.0;
  std::vector<double> grad(8, 0.0);
  grad[0] = 1.0;
  const auto r = gradcheck(probe, x, grad, {{"all", {0, 1, 2, 3, 4, 5, 6, 7}}}, opts);
  CHECK(r.passed);
  CHECK(r.tie_rejections == 2);
  CHECK(r.checked == 6);
}

TEST_CASE("toy samples") {
  auto task = default_toy_task();
  task.points = 128;
  task.train_count = 20;
  task.test_count = 5;
  const auto train = make_samples(task, true);
  const auto test = make_samples(task, false);
  REQUIRE(train.size() == 20);
  REQUIRE(test.size() == 5);
  for (const auto& s : train) {
    CHECK(std::abs(s.label.norm() - 1.0) < 1e-9);
    CHECK(s.cloud.size() == 128);
    CHECK(s.cloud.points().colwise().mean().norm() < 1e-12);
    CHECK(std::acos(std::clamp(s.label.z(), -1.0, 1.0)) <= task.max_tilt_deg * M_PI / 180.0 + 1e-12);
  }
  CHECK(train[0].seed != test[0].seed);
  CHECK(make_sample(task, 9).cloud.points() == make_sample(task, 9).cloud.points());
  CHECK(angular_error_deg(Vec3(1, 0, 0), Vec3(0, 1, 0)) == doctest::Approx(90.0));
  CHECK(angular_error_deg(Vec3(2, 0, 0), Vec3(1, 0, 0)) == 0.0);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("constant labels are learned and loss does not increase") {
  auto task = default_toy_task();
  task.points = 48;
  task.train_count = 24;
  task.test_count = 8;
  auto train = make_samples(task, true);
  auto test = make_samples(task, false);
  const Vec3 up = Vec3(0.3, -0.4, 0.866).normalized();
  for (auto* set : {&train, &test})
    for (auto& s : *set) s.label = up;

  // Full-batch steps so the curve is a plain gradient-descent trajectory.
  TrainOptions opts;
  opts.batch_size = task.train_count;
  opts.epochs = 12;
  opts.seed = 3;
  const auto r = train_on_samples(train, test, small_model(8), opts);
  REQUIRE(r.curve.size() == 12);
  for (std::size_t e = 1; e < r.curve.size(); ++e) CHECK(r.curve[e].train_loss <= r.curve[e - 1].train_loss);
  CHECK(r.test_median_error_deg < 5.0);

  const auto again = train_on_samples(train, test, small_model(8), opts);
  CHECK(flatten(again.model).values == flatten(r.model).values);
  CHECK(again.test_errors_deg == r.test_errors_deg);
}

TEST_CASE("non-finite loss reports the sample seed") {
  auto task = default_toy_task();
  task.points = 32;
  task.train_count = 2;
  task.test_count = 0;
  const auto train = make_samples(task, true);
  auto m = small_model(9);
  m.head = LinearMap::zeros(8, 3);
  TrainOptions opts;
  opts.epochs = 1;
  try {
    train_on_samples(train, {}, m, opts);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    const std::string what = e.what();
    const bool names_seed = what.find(std::to_string(train[0].seed)) != std::string::npos ||
                            what.find(std::to_string(train[1].seed)) != std::string::npos;
    CHECK(names_seed);
  }
}
