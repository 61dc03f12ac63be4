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

#ifndef HSPOSE_GRAPHCONV_HPP
#define HSPOSE_GRAPHCONV_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "hspose/common.hpp"
#include "hspose/neighbors.hpp"
#include "hspose/pointcloud.hpp"
#include "hspose/rng.hpp"

namespace hspose {

/// Support directions shorter than this are rescaled up to it.
inline constexpr double kMinSupportNorm = 1e-8;
/// Neighbor offsets shorter than this have no direction (cosine term is 0).
inline constexpr double kDegenerateOffset = 1e-12;

/// One deformable graph-convolution kernel: a central weight plus S support
/// directions, each with its own feature weight.
struct GCKernel {
  RowMatrix support_dirs;          ///< S x 3
  Eigen::VectorXd center_weights;  ///< D_in
  RowMatrix support_weights;       ///< S x D_in, row s pairs with support_dirs row s

  Index support_count() const { return support_dirs.rows(); }
  Index d_in() const { return center_weights.size(); }
};

/// One kernel per output channel; all kernels share S and D_in.
struct GCLayer {
  Index d_in = 0;
  Index d_out = 0;
  Index support = 0;
  std::vector<GCKernel> kernels;

  /// All-zero tensors of the right shapes. Used for gradient accumulators;
  /// zero support directions make it an invalid forward layer.
  static GCLayer zeros(Index d_in, Index d_out, Index support);

  /// Support directions uniform on the unit sphere, weights uniform in
  /// +-1/sqrt(d_in).
  static GCLayer random(Index d_in, Index d_out, Index support, Rng& rng);

  /// Throws std::invalid_argument on inconsistent shapes, non-finite values
  /// or a support direction shorter than kMinSupportNorm.
  void validate() const;

  /// Rescales any support direction shorter than kMinSupportNorm (a zero
  /// direction becomes kMinSupportNorm * e_x).
  void enforce_support_norms();
};

/// Feature response times direction cosine between the neighbor offset
/// p_m - p_i and the support direction k_s.
double similarity(const Vec3& p_i, const Vec3& p_m, std::span<const double> f_m, const Vec3& k_s,
                  std::span<const double> w_s);

/// Forward result plus what the backward pass needs.
struct GCForward {
  FeatureMap output;  ///< N x D_out
  /// Winning neighbor slot per (point, channel, support), flattened as
  /// (n * D_out + c) * S + s. Ties go to the lowest slot.
  std::vector<Index> argmax;
};

struct GCBackward {
  FeatureMap grad_features;  ///< N x D_in
  GCLayer grad_layer;        ///< same shapes as the layer
};

/// out[n][c] = f_n . wC_c + sum_s max_{m in nbrs(n)} sim(p_n, p_m, f_m, k_cs, w_cs).
GCForward gc_forward(const PointCloud& cloud, const FeatureMap& features, const NeighborIndex& nbrs,
                     const GCLayer& layer);

/// Exact gradients of gc_forward for fixed neighbor lists; the max routes to
/// the recorded argmax. Point positions are treated as constants.
GCBackward gc_backward(const PointCloud& cloud, const FeatureMap& features, const NeighborIndex& nbrs,
                       const GCLayer& layer, const GCForward& forward, const FeatureMap& grad_out);

struct PoolResult {
  PointCloud cloud;
  FeatureMap features;          ///< keep x D
  std::vector<Index> selected;  ///< input index of each surviving point, ascending
  std::vector<Index> source;    ///< input row of each pooled value, keep * D row-major
};

/// Keeps `keep` points chosen by seeded sampling; each survivor's feature is
/// the channel-wise max over itself and its neighbors in `nbrs` (which may
/// have m = 0).
PoolResult graph_max_pool(const PointCloud& cloud, const FeatureMap& features, const NeighborIndex& nbrs,
                          Index keep, std::uint64_t seed);

/// Routes pooled gradients back to the winning input rows.
FeatureMap graph_max_pool_backward(const PoolResult& pooled, Index input_rows, const FeatureMap& grad_out);

}  // namespace hspose

#endif  // HSPOSE_GRAPHCONV_HPP
