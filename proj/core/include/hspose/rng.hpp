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

#ifndef HSPOSE_RNG_HPP
#define HSPOSE_RNG_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "hspose/common.hpp"

namespace hspose {

/// xoshiro256** 1.0 seeded through splitmix64.
///
/// All randomness in the library flows through this generator, and every
/// derived quantity (uniform doubles, bounded integers, normals) is computed
/// by code in this file rather than by <random> distributions, whose output
/// is implementation-defined. A given seed therefore yields the same stream
/// on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform();
  double uniform(double lo, double hi);

  /// Unbiased integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (one variate per call, no caching).
  double normal();

  /// Uniformly distributed direction on the unit sphere.
  Vec3 unit_vector();

 private:
  std::array<std::uint64_t, 4> state_;
};

/// `count` distinct indices from [0, total) in draw order (partial
/// Fisher-Yates over the identity permutation).
std::vector<Index> sample_without_replacement(Index total, Index count, Rng& rng);

/// Deterministically combine a seed with a stream tag (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace hspose

#endif  // HSPOSE_RNG_HPP
