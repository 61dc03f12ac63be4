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

#include "hspose/hslayer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hspose {
namespace {

void check_linear(const RowMatrix& input, const LinearMap& map, const char* who) {
  if (input.cols() != map.d_in()) {
    throw ShapeError(std::string(who) + ": input dim " + std::to_string(input.cols()) + " != " +
                     std::to_string(map.d_in()));
  }
  if (map.bias.size() != map.d_out()) throw ShapeError(std::string(who) + ": bias size mismatch");
}

// FNV-1a over 64-bit words.
struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
};

}  // namespace

LinearMap LinearMap::zeros(Index d_in, Index d_out) {
  return {RowMatrix::Zero(d_in, d_out), Eigen::RowVectorXd::Zero(d_out)};
}

LinearMap LinearMap::random(Index d_in, Index d_out, Rng& rng) {
  LinearMap map = zeros(d_in, d_out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (Index i = 0; i < map.weights.size(); ++i) map.weights.data()[i] = rng.uniform(-bound, bound);
  for (Index i = 0; i < d_out; ++i) map.bias[i] = rng.uniform(-bound, bound);
  return map;
}

FeatureMap ste_forward(const RowMatrix& input, const LinearMap& ste) {
  check_linear(input, ste, "ste_forward");
  FeatureMap out = input * ste.weights;
  out.rowwise() += ste.bias;
  return out;
}

LinearBackward linear_backward(const RowMatrix& input, const LinearMap& map, const FeatureMap& grad_out) {
  check_linear(input, map, "linear_backward");
  if (grad_out.rows() != input.rows() || grad_out.cols() != map.d_out()) throw ShapeError("linear_backward: grad shape");
  LinearBackward back;
  back.grad_input = grad_out * map.weights.transpose();
  back.grad.weights = input.transpose() * grad_out;
  back.grad.bias = grad_out.colwise().sum();
  return back;
}

ORLForward orl_forward(const PointCloud& cloud, const FeatureMap& features, const NeighborIndex& rfp,
                       const LinearMap& orl) {
  const Index n_pts = features.rows();
  const Index dim = features.cols();
  if (n_pts != cloud.size() || rfp.rows() != n_pts) throw ShapeError("orl_forward: point count mismatch");
  if (orl.d_in() != 2 * dim || orl.d_out() != dim || orl.bias.size() != dim) {
    throw ShapeError("orl_forward: linear map must be " + std::to_string(2 * dim) + " -> " + std::to_string(dim));
  }

  ORLForward fwd;
  fwd.argmax.resize(static_cast<std::size_t>(n_pts * dim));
  fwd.global = Eigen::RowVectorXd::Zero(dim);
  for (Index n = 0; n < n_pts; ++n) {
    const auto row = rfp.row(n);
    for (Index c = 0; c < dim; ++c) {
      double best = features(n, c);
      Index src = n;
      for (const auto& nb : row) {
        if (features(nb.id, c) > best) {
          best = features(nb.id, c);
          src = nb.id;
        }
      }
      fwd.argmax[static_cast<std::size_t>(n * dim + c)] = src;
      fwd.global[c] += best;
    }
  }
  fwd.global /= static_cast<double>(n_pts);

  const auto w_global = orl.weights.topRows(dim);
  const auto w_local = orl.weights.bottomRows(dim);
  const Eigen::RowVectorXd shared = fwd.global * w_global + orl.bias;
  FeatureMap adjust = features * w_local;
  adjust.rowwise() += shared;
  fwd.output = features + adjust;
  return fwd;
}

ORLBackward orl_backward(const FeatureMap& features, const ORLForward& forward, const LinearMap& orl,
                         const FeatureMap& grad_out) {
  const Index n_pts = features.rows();
  const Index dim = features.cols();
  if (grad_out.rows() != n_pts || grad_out.cols() != dim) throw ShapeError("orl_backward: grad shape");
  if (static_cast<Index>(forward.argmax.size()) != n_pts * dim) throw ShapeError("orl_backward: forward record");

  const auto w_global = orl.weights.topRows(dim);
  const auto w_local = orl.weights.bottomRows(dim);
  const Eigen::RowVectorXd grad_sum = grad_out.colwise().sum();

  ORLBackward back;
  back.grad.weights.resize(2 * dim, dim);
  back.grad.weights.topRows(dim) = forward.global.transpose() * grad_sum;
  back.grad.weights.bottomRows(dim) = features.transpose() * grad_out;
  back.grad.bias = grad_sum;

  back.grad_features = grad_out + grad_out * w_local.transpose();
  const Eigen::RowVectorXd grad_local_max = (grad_sum * w_global.transpose()) / static_cast<double>(n_pts);
  for (Index n = 0; n < n_pts; ++n) {
    for (Index c = 0; c < dim; ++c) {
      back.grad_features(forward.argmax[static_cast<std::size_t>(n * dim + c)], c) += grad_local_max[c];
    }
  }
  return back;
}

void HSLayerParams::validate() const {
  gc.validate();
  const Index d = gc.d_out;
  const Index ste_in = is_first_layer ? 3 : gc.d_in;
  if (use_ste && (ste.d_in() != ste_in || ste.d_out() != d || ste.bias.size() != d)) {
    throw std::invalid_argument("HSLayerParams: STE must map " + std::to_string(ste_in) + " -> " + std::to_string(d));
  }
  if (use_orl && (orl.d_in() != 2 * d || orl.d_out() != d || orl.bias.size() != d)) {
    throw std::invalid_argument("HSLayerParams: ORL must map " + std::to_string(2 * d) + " -> " + std::to_string(d));
  }
  if (m_rff < 1 || (use_orl && m_orl < 1)) throw std::invalid_argument("HSLayerParams: neighbor counts must be >= 1");
}

HSLayerParams HSLayerParams::random(Index d_in, Index d_out, Index support, Index m_rff, Index m_orl,
                                    bool first_layer, Rng& rng) {
  HSLayerParams p;
  p.gc = GCLayer::random(d_in, d_out, support, rng);
  p.ste = LinearMap::random(first_layer ? 3 : d_in, d_out, rng);
  p.orl = LinearMap::random(2 * d_out, d_out, rng);
  p.m_rff = m_rff;
  p.m_orl = m_orl;
  p.is_first_layer = first_layer;
  return p;
}

HSLayerForward hs_layer_forward(const PointCloud& cloud, const FeatureMap& features, const HSLayerParams& params) {
  const Index n_pts = cloud.size();
  if (n_pts <= params.m_rff || (params.use_orl && n_pts <= params.m_orl)) {
    throw std::invalid_argument("hs_layer_forward: " + std::to_string(n_pts) +
                                " points are too few for the configured neighbor counts");
  }
  const bool point_rf = params.is_first_layer || params.receptive_field == ReceptiveField::point;
  if (!params.is_first_layer && features.rows() != n_pts) throw ShapeError("hs_layer_forward: feature rows != points");

  NeighborIndex rf = point_rf ? knn_points(cloud, params.m_rff) : knn_features(features, params.m_rff);
  NeighborIndex rf_orl;
  if (params.use_orl) rf_orl = (point_rf && params.m_orl == params.m_rff) ? rf : knn_points(cloud, params.m_orl);
  return hs_layer_forward(cloud, features, params, rf, rf_orl);
}

HSLayerForward hs_layer_forward(const PointCloud& cloud, const FeatureMap& features, const HSLayerParams& params,
                                const NeighborIndex& rf, const NeighborIndex& rf_orl) {
  const Index n_pts = cloud.size();
  if (!params.is_first_layer && (features.rows() != n_pts || features.cols() != params.gc.d_in)) {
    throw ShapeError("hs_layer_forward: features must be " + std::to_string(n_pts) + " x " +
                     std::to_string(params.gc.d_in));
  }
  HSLayerForward fwd;
  fwd.rf = rf;
  fwd.rf_orl = rf_orl;
  fwd.gc_input = params.is_first_layer ? FeatureMap::Ones(n_pts, params.gc.d_in) : features;
  fwd.gc = gc_forward(cloud, fwd.gc_input, fwd.rf, params.gc);

  if (params.use_orl) {
    fwd.orl = orl_forward(cloud, fwd.gc.output, fwd.rf_orl, params.orl);
    fwd.output = fwd.orl.output;
  } else {
    fwd.output = fwd.gc.output;
  }
  if (params.use_ste) {
    fwd.output += params.is_first_layer ? ste_forward(RowMatrix(cloud.points()), params.ste)
                                        : ste_forward(features, params.ste);
  }
  return fwd;
}

HSLayerBackward hs_layer_backward(const PointCloud& cloud, const FeatureMap& features, const HSLayerParams& params,
                                  const HSLayerForward& forward, const FeatureMap& grad_out) {
  const Index n_pts = cloud.size();
  const Index d = params.d_out();
  if (grad_out.rows() != n_pts || grad_out.cols() != d) throw ShapeError("hs_layer_backward: grad shape");

  HSLayerBackward back;
  back.grad_features = FeatureMap::Zero(n_pts, params.input_dim());
  back.grad.ste = LinearMap::zeros(params.ste.d_in(), params.ste.d_out());
  back.grad.orl = LinearMap::zeros(params.orl.d_in(), params.orl.d_out());

  if (params.use_ste) {
    auto lb = params.is_first_layer ? linear_backward(RowMatrix(cloud.points()), params.ste, grad_out)
                                    : linear_backward(features, params.ste, grad_out);
    back.grad.ste = std::move(lb.grad);
    if (!params.is_first_layer) back.grad_features += lb.grad_input;
  }

  FeatureMap grad_gc;
  if (params.use_orl) {
    auto ob = orl_backward(forward.gc.output, forward.orl, params.orl, grad_out);
    back.grad.orl = std::move(ob.grad);
    grad_gc = std::move(ob.grad_features);
  } else {
    grad_gc = grad_out;
  }

  auto gb = gc_backward(cloud, forward.gc_input, forward.rf, params.gc, forward.gc, grad_gc);
  back.grad.gc = std::move(gb.grad_layer);
  if (!params.is_first_layer) back.grad_features += gb.grad_features;
  return back;
}

void EncoderConfig::validate() const {
  if (layers.empty()) throw std::invalid_argument("EncoderConfig: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    layer.validate();
    if (layer.is_first_layer != (l == 0)) {
      throw std::invalid_argument("EncoderConfig: exactly the first layer must be marked first");
    }
    if (l > 0 && layer.gc.d_in != layers[l - 1].d_out()) {
      throw std::invalid_argument("EncoderConfig: layer " + std::to_string(l) + " expects input dim " +
                                  std::to_string(layer.gc.d_in) + " but previous layer emits " +
                                  std::to_string(layers[l - 1].d_out()));
    }
  }
  for (const auto& [idx, stage] : pool_after) {
    if (idx < 0 || idx >= static_cast<Index>(layers.size())) throw std::invalid_argument("EncoderConfig: pool index out of range");
    if (stage.keep < 1 || stage.m < 0) throw std::invalid_argument("EncoderConfig: invalid pool stage");
  }
}

EncoderTopology topology_of(const EncoderForward& forward) {
  EncoderTopology topo;
  for (const auto& layer : forward.layers) topo.rf.push_back(layer.rf);
  return topo;
}

EncoderForward hs_encoder_forward(const PointCloud& cloud, const EncoderConfig& cfg, const EncoderTopology* frozen) {
  const auto n_layers = cfg.layers.size();
  if (n_layers == 0) throw std::invalid_argument("hs_encoder_forward: no layers");
  if (frozen != nullptr && frozen->rf.size() != n_layers) throw ShapeError("hs_encoder_forward: frozen topology size");

  EncoderForward fwd;
  PointCloud layer_cloud = cloud;
  FeatureMap current(cloud.size(), 0);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& params = cfg.layers[l];
    fwd.clouds.push_back(layer_cloud);
    fwd.inputs.push_back(current);
    if (frozen != nullptr) {
      NeighborIndex rf_orl = params.use_orl ? knn_points(layer_cloud, params.m_orl) : NeighborIndex{};
      fwd.layers.push_back(hs_layer_forward(layer_cloud, current, params, frozen->rf[l], rf_orl));
    } else {
      fwd.layers.push_back(hs_layer_forward(layer_cloud, current, params));
    }
    current = fwd.layers.back().output;

    const auto stage = cfg.pool_after.find(static_cast<Index>(l));
    if (stage == cfg.pool_after.end()) {
      fwd.pools.emplace_back();
      continue;
    }
    const Index m = stage->second.m;
    const NeighborIndex nbrs = m > 0 ? knn_points(layer_cloud, m) : NeighborIndex(layer_cloud.size(), 0);
    auto pooled = graph_max_pool(layer_cloud, current, nbrs, stage->second.keep, mix_seed(cfg.seed, l));
    current = pooled.features;
    layer_cloud = pooled.cloud;
    fwd.pools.emplace_back(std::move(pooled));
  }
  fwd.clouds.push_back(std::move(layer_cloud));
  fwd.features = std::move(current);
  return fwd;
}

EncoderGrad zero_grad(const EncoderConfig& cfg) {
  EncoderGrad grad;
  for (const auto& p : cfg.layers) {
    grad.layers.push_back({GCLayer::zeros(p.gc.d_in, p.gc.d_out, p.gc.support),
                           LinearMap::zeros(p.ste.d_in(), p.ste.d_out()),
                           LinearMap::zeros(p.orl.d_in(), p.orl.d_out())});
  }
  return grad;
}

EncoderGrad hs_encoder_backward(const EncoderConfig& cfg, const EncoderForward& forward, const FeatureMap& grad_out) {
  const auto n_layers = cfg.layers.size();
  if (forward.layers.size() != n_layers) throw ShapeError("hs_encoder_backward: forward record does not match config");
  EncoderGrad grad;
  grad.layers.resize(n_layers);
  FeatureMap g = grad_out;
  for (std::size_t li = n_layers; li-- > 0;) {
    const auto& layer_fwd = forward.layers[li];
    if (forward.pools[li]) g = graph_max_pool_backward(*forward.pools[li], layer_fwd.output.rows(), g);
    // clouds[li] is the cloud the layer ran on.
    auto back = hs_layer_backward(forward.clouds[li], forward.inputs[li], cfg.layers[li], layer_fwd, g);
    grad.layers[li] = std::move(back.grad);
    g = std::move(back.grad_features);
  }
  return grad;
}

std::uint64_t decision_signature(const EncoderForward& forward) {
  Fnv fnv;
  for (std::size_t l = 0; l < forward.layers.size(); ++l) {
    const auto& layer = forward.layers[l];
    for (Index i = 0; i < layer.rf.rows(); ++i) {
      for (const auto& nb : layer.rf.row(i)) fnv.add(static_cast<std::uint64_t>(nb.id));
    }
    for (const Index a : layer.gc.argmax) fnv.add(static_cast<std::uint64_t>(a));
    for (const Index a : layer.orl.argmax) fnv.add(static_cast<std::uint64_t>(a));
    if (forward.pools[l]) {
      for (const Index a : forward.pools[l]->source) fnv.add(static_cast<std::uint64_t>(a));
    }
  }
  return fnv.h;
}

}  // namespace hspose
