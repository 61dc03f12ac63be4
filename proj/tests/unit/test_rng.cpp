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
#include <set>

#include "hspose/rng.hpp"

using namespace hspose;

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs = differs || x != c.next();
  }
  CHECK(differs);
}

TEST_CASE("uniform stays in range and has the right mean") {
  Rng rng(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // 5 sigma of the sample mean of U(0,1)
  CHECK(std::abs(sum / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-3.0, 2.0);
    CHECK(v >= -3.0);
    CHECK(v < 2.0);
  }
}

TEST_CASE("below is bounded and roughly uniform") {
  Rng rng(7);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.below(6);
    REQUIRE(k < 6);
    ++counts[k];
  }
  for (const int c : counts) CHECK(std::abs(c - n / 6) < 5.0 * std::sqrt(n * (1.0 / 6) * (5.0 / 6)));
  CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
  CHECK(rng.below(1) == 0);
}

TEST_CASE("normal has unit variance") {
  Rng rng(3);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.02);
  CHECK(std::abs(s2 / n - 1.0) < 0.03);
}

TEST_CASE("unit vectors are unit and unbiased") {
  Rng rng(9);
  Vec3 mean = Vec3::Zero();
  for (int i = 0; i < 20000; ++i) {
    const Vec3 v = rng.unit_vector();
    REQUIRE(std::abs(v.norm() - 1.0) < 1e-12);
    mean += v;
  }
  CHECK((mean / 20000.0).norm() < 0.03);
}

TEST_CASE("sample_without_replacement") {
  Rng rng(5);
  const auto s = sample_without_replacement(100, 30, rng);
  CHECK(s.size() == 30);
  CHECK(std::set<Index>(s.begin(), s.end()).size() == 30);
  for (const auto i : s) CHECK((i >= 0 && i < 100));
  auto all = sample_without_replacement(10, 10, rng);
  std::sort(all.begin(), all.end());
  for (Index i = 0; i < 10; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);
  CHECK(sample_without_replacement(5, 0, rng).empty());
  CHECK_THROWS(sample_without_replacement(5, 6, rng));
}

TEST_CASE("mix_seed separates streams") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  CHECK(mix_seed(1, 5) == mix_seed(1, 5));
}
