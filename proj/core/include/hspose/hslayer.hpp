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

#ifndef HSPOSE_HSLAYER_HPP
#define HSPOSE_HSLAYER_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "hspose/common.hpp"
#include "hspose/graphconv.hpp"
#include "hspose/neighbors.hpp"
#include "hspose/pointcloud.hpp"
#include "hspose/rng.hpp"

namespace hspose {

/// Affine map out = x * weights + bias applied row-wise.
struct LinearMap {
  RowMatrix weights;      ///< D_in x D_out
  Eigen::RowVectorXd bias;  ///< D_out

  Index d_in() const { return weights.rows(); }
  Index d_out() const { return weights.cols(); }

  static LinearMap zeros(Index d_in, Index d_out);
  /// Weights and bias uniform in +-1/sqrt(d_in).
  static LinearMap random(Index d_in, Index d_out, Rng& rng);
};

struct LinearBackward {
  RowMatrix grad_input;
  LinearMap grad;
};

/// Scale-and-translation encoding path: a per-point affine map. In the first
/// layer the input is the (mean-centred) point positions.
FeatureMap ste_forward(const RowMatrix& input, const LinearMap& ste);
LinearBackward linear_backward(const RowMatrix& input, const LinearMap& map, const FeatureMap& grad_out);

struct ORLForward {
  FeatureMap output;
  Eigen::RowVectorXd global;  ///< mean over points of the local channel-wise max
  /// Row that supplied the local max for (n, c), flattened n * D + c.
  std::vector<Index> argmax;
};

struct ORLBackward {
  FeatureMap grad_features;
  LinearMap grad;
};

/// Outlier-robust layer:
///   g_n      = channel-wise max over {f_n} and f_m for m in rfp(n)
///   f_global = mean_n g_n
///   out_n    = f_n + [f_global, f_n] * W + b
ORLForward orl_forward(const PointCloud& cloud, const FeatureMap& features, const NeighborIndex& rfp,
                       const LinearMap& orl);
ORLBackward orl_backward(const FeatureMap& features, const ORLForward& forward, const LinearMap& orl,
                         const FeatureMap& grad_out);

enum class ReceptiveField { feature, point };

struct HSLayerParams {
  GCLayer gc;        ///< geometric path
  LinearMap ste;     ///< input dim 3 in the first layer, else D_in
  LinearMap orl;     ///< 2*D_out -> D_out
  Index m_rff = 10;  ///< neighbors of the GC receptive field
  Index m_orl = 10;  ///< RF-P neighbors of the ORL local max
  bool is_first_layer = false;

  // Ablation switches. A disabled path contributes nothing and its
  // parameters are left out of the trainable set.
  bool use_ste = true;
  bool use_orl = true;
  ReceptiveField receptive_field = ReceptiveField::feature;

  Index d_out() const { return gc.d_out; }
  /// Width of the feature map the layer consumes (0 for the first layer).
  Index input_dim() const { return is_first_layer ? 0 : gc.d_in; }

  void validate() const;

  /// Freshly initialised layer. For the first layer `d_in` is the width of
  /// the all-ones GC input and the STE consumes 3D positions.
  static HSLayerParams random(Index d_in, Index d_out, Index support, Index m_rff, Index m_orl,
                              bool first_layer, Rng& rng);
};

struct HSLayerForward {
  NeighborIndex rf;      ///< receptive field of the GC layer
  NeighborIndex rf_orl;  ///< RF-P used by ORL (empty when ORL is off)
  FeatureMap gc_input;   ///< all ones in the first layer, otherwise the input
  GCForward gc;
  ORLForward orl;
  FeatureMap output;
};

struct HSLayerGrad {
  GCLayer gc;
  LinearMap ste;
  LinearMap orl;
};

struct HSLayerBackward {
  FeatureMap grad_features;  ///< N x input_dim()
  HSLayerGrad grad;
};

/// out = ORL(GC(RF)) + STE. RF is RF-P with all-ones features in the first
/// layer and RF-F over `features` otherwise; neighbor lists are recomputed on
/// every call. `features` is ignored (may be N x 0) in the first layer.
HSLayerForward hs_layer_forward(const PointCloud& cloud, const FeatureMap& features, const HSLayerParams& params);

/// Same map with caller-supplied neighbor lists (selection held fixed).
HSLayerForward hs_layer_forward(const PointCloud& cloud, const FeatureMap& features, const HSLayerParams& params,
                                const NeighborIndex& rf, const NeighborIndex& rf_orl);

/// Gradients with the neighbor selection treated as constant.
HSLayerBackward hs_layer_backward(const PointCloud& cloud, const FeatureMap& features, const HSLayerParams& params,
                                  const HSLayerForward& forward, const FeatureMap& grad_out);

struct PoolStage {
  Index keep = 0;
  Index m = 0;

  friend bool operator==(const PoolStage&, const PoolStage&) = default;
};

struct EncoderConfig {
  std::vector<HSLayerParams> layers;
  std::map<Index, PoolStage> pool_after;  ///< layer index -> pooling applied after it
  std::uint64_t seed = 0;                 ///< pooling selections derive from it

  Index d_out() const { return layers.empty() ? 0 : layers.back().d_out(); }
  void validate() const;
};

struct EncoderForward {
  std::vector<PointCloud> clouds;    ///< clouds[l] feeds layer l; back() is the output cloud
  std::vector<FeatureMap> inputs;    ///< features entering layer l
  std::vector<HSLayerForward> layers;
  std::vector<std::optional<PoolResult>> pools;  ///< pooling after layer l, if configured
  FeatureMap features;                           ///< encoder output

  const PointCloud& cloud() const { return clouds.back(); }
};

/// Per-layer GC receptive fields captured from a previous forward pass.
struct EncoderTopology {
  std::vector<NeighborIndex> rf;
};

EncoderTopology topology_of(const EncoderForward& forward);

/// Runs the layers in order with the configured pooling stages. With
/// `frozen`, GC receptive fields come from it instead of a fresh search.
EncoderForward hs_encoder_forward(const PointCloud& cloud, const EncoderConfig& cfg,
                                  const EncoderTopology* frozen = nullptr);

struct EncoderGrad {
  std::vector<HSLayerGrad> layers;
};

EncoderGrad hs_encoder_backward(const EncoderConfig& cfg, const EncoderForward& forward, const FeatureMap& grad_out);

/// Zero gradient with the shapes of `cfg`.
EncoderGrad zero_grad(const EncoderConfig& cfg);

/// Hash of every discrete choice made in a forward pass (receptive fields,
/// max routing in GC, ORL and pooling). Two passes with equal signatures sit
/// on the same smooth piece of the network.
std::uint64_t decision_signature(const EncoderForward& forward);

}  // namespace hspose

#endif  // HSPOSE_HSLAYER_HPP
