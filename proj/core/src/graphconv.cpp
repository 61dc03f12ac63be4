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

#include "hspose/graphconv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hspose {
namespace {

// Unit offset from p_i to p_m, or zero when the offset is degenerate.
inline Vec3 offset_direction(const Vec3& p_i, const Vec3& p_m) {
  const Vec3 d = p_m - p_i;
  const double len = d.norm();
  if (len < kDegenerateOffset) return Vec3::Zero();
#ifdef HSPOSE_FAULT_SIM_NORMALIZATION
  return d;
#else
  return d / len;
#endif
}

inline double dot(const double* a, const double* b, Index n) {
  double acc = 0.0;
  for (Index k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

void check_shapes(const PointCloud& cloud, const FeatureMap& features, const NeighborIndex& nbrs,
                  const GCLayer& layer) {
  if (features.rows() != cloud.size()) {
    throw ShapeError("gc: feature rows " + std::to_string(features.rows()) + " != point count " +
                     std::to_string(cloud.size()));
  }
  if (features.cols() != layer.d_in) {
    throw ShapeError("gc: feature dim " + std::to_string(features.cols()) + " != layer d_in " +
                     std::to_string(layer.d_in));
  }
  if (nbrs.rows() != cloud.size()) throw ShapeError("gc: neighbor index built over a different cloud");
  if (layer.support > 0 && nbrs.m() < 1) throw ShapeError("gc: support terms need at least one neighbor");
  if (static_cast<Index>(layer.kernels.size()) != layer.d_out) throw ShapeError("gc: kernel count != d_out");
}

}  // namespace

GCLayer GCLayer::zeros(Index d_in, Index d_out, Index support) {
  GCLayer layer{d_in, d_out, support, {}};
  layer.kernels.reserve(static_cast<std::size_t>(d_out));
  for (Index c = 0; c < d_out; ++c) {
    layer.kernels.push_back({RowMatrix::Zero(support, 3), Eigen::VectorXd::Zero(d_in),
                             RowMatrix::Zero(support, d_in)});
  }
  return layer;
}

GCLayer GCLayer::random(Index d_in, Index d_out, Index support, Rng& rng) {
  GCLayer layer = zeros(d_in, d_out, support);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (auto& k : layer.kernels) {
    for (Index s = 0; s < support; ++s) k.support_dirs.row(s) = rng.unit_vector().transpose();
    for (Index j = 0; j < d_in; ++j) k.center_weights[j] = rng.uniform(-bound, bound);
    for (Index s = 0; s < support; ++s) {
      for (Index j = 0; j < d_in; ++j) k.support_weights(s, j) = rng.uniform(-bound, bound);
    }
  }
  return layer;
}

void GCLayer::validate() const {
  if (d_in < 1 || d_out < 1 || support < 0) throw std::invalid_argument("GCLayer: invalid dimensions");
  if (static_cast<Index>(kernels.size()) != d_out) throw std::invalid_argument("GCLayer: kernel count != d_out");
  for (const auto& k : kernels) {
    if (k.support_dirs.rows() != support || k.support_dirs.cols() != 3 || k.center_weights.size() != d_in ||
        k.support_weights.rows() != support || k.support_weights.cols() != d_in) {
      throw std::invalid_argument("GCLayer: kernel shape mismatch");
    }
    if (!k.support_dirs.allFinite() || !k.center_weights.allFinite() || !k.support_weights.allFinite()) {
      throw std::invalid_argument("GCLayer: non-finite parameter");
    }
    for (Index s = 0; s < support; ++s) {
      if (k.support_dirs.row(s).norm() < kMinSupportNorm) {
        throw std::invalid_argument("GCLayer: support direction shorter than 1e-8");
      }
    }
  }
}

void GCLayer::enforce_support_norms() {
  for (auto& k : kernels) {
    for (Index s = 0; s < k.support_count(); ++s) {
      const double n = k.support_dirs.row(s).norm();
      if (n >= kMinSupportNorm) continue;
      if (n > 0.0) {
        k.support_dirs.row(s) *= kMinSupportNorm / n;
      } else {
        k.support_dirs.row(s) << kMinSupportNorm, 0.0, 0.0;
      }
    }
  }
}

double similarity(const Vec3& p_i, const Vec3& p_m, std::span<const double> f_m, const Vec3& k_s,
                  std::span<const double> w_s) {
  if (f_m.size() != w_s.size()) throw ShapeError("similarity: feature/weight dimension mismatch");
  const double k_norm = k_s.norm();
  if (k_norm < kMinSupportNorm) throw std::invalid_argument("similarity: support direction too short");
  const double response = dot(f_m.data(), w_s.data(), static_cast<Index>(f_m.size()));
  const Vec3 u = offset_direction(p_i, p_m);
  return response * (u.dot(k_s) / k_norm);
}

GCForward gc_forward(const PointCloud& cloud, const FeatureMap& features, const NeighborIndex& nbrs,
                     const GCLayer& layer) {
  check_shapes(cloud, features, nbrs, layer);
  const Index n_pts = cloud.size();
  const Index m = nbrs.m();
  const Index d_in = layer.d_in;
  const Index d_out = layer.d_out;
  const Index s_count = layer.support;

  // theta(p, c*S+s) = f_p . w_cs ; unit support directions per (c, s).
  RowMatrix theta(n_pts, d_out * s_count);
  RowMatrix khat(d_out * s_count, 3);
  for (Index c = 0; c < d_out; ++c) {
    const auto& k = layer.kernels[static_cast<std::size_t>(c)];
    for (Index s = 0; s < s_count; ++s) {
      khat.row(c * s_count + s) = k.support_dirs.row(s) / k.support_dirs.row(s).norm();
      for (Index p = 0; p < n_pts; ++p) {
        theta(p, c * s_count + s) = dot(features.row(p).data(), k.support_weights.row(s).data(), d_in);
      }
    }
  }

  GCForward fwd;
  fwd.output.resize(n_pts, d_out);
  fwd.argmax.assign(static_cast<std::size_t>(n_pts * d_out * s_count), 0);
  std::vector<Vec3> dirs(static_cast<std::size_t>(m));
  for (Index n = 0; n < n_pts; ++n) {
    const Vec3 p_n = cloud.point(n);
    const auto row = nbrs.row(n);
    for (Index j = 0; j < m; ++j) dirs[static_cast<std::size_t>(j)] = offset_direction(p_n, cloud.point(row[static_cast<std::size_t>(j)].id));

    for (Index c = 0; c < d_out; ++c) {
      const auto& k = layer.kernels[static_cast<std::size_t>(c)];
      double value = dot(features.row(n).data(), k.center_weights.data(), d_in);
      for (Index s = 0; s < s_count; ++s) {
        const Index cs = c * s_count + s;
        const Vec3 kh = khat.row(cs).transpose();
        double best = 0.0;
        Index best_j = 0;
        for (Index j = 0; j < m; ++j) {
          const double sim = theta(row[static_cast<std::size_t>(j)].id, cs) * dirs[static_cast<std::size_t>(j)].dot(kh);
          if (j == 0 || sim > best) {
            best = sim;
            best_j = j;
          }
        }
        value += best;
        fwd.argmax[static_cast<std::size_t>((n * d_out + c) * s_count + s)] = best_j;
      }
      fwd.output(n, c) = value;
    }
  }
  return fwd;
}

GCBackward gc_backward(const PointCloud& cloud, const FeatureMap& features, const NeighborIndex& nbrs,
                       const GCLayer& layer, const GCForward& forward, const FeatureMap& grad_out) {
  check_shapes(cloud, features, nbrs, layer);
  const Index n_pts = cloud.size();
  const Index d_in = layer.d_in;
  const Index d_out = layer.d_out;
  const Index s_count = layer.support;
  if (grad_out.rows() != n_pts || grad_out.cols() != d_out) throw ShapeError("gc_backward: grad_out shape");
  if (static_cast<Index>(forward.argmax.size()) != n_pts * d_out * s_count) {
    throw ShapeError("gc_backward: forward record does not match layer");
  }

  GCBackward back{FeatureMap::Zero(n_pts, d_in), GCLayer::zeros(d_in, d_out, s_count)};
  for (Index n = 0; n < n_pts; ++n) {
    const Vec3 p_n = cloud.point(n);
    const auto row = nbrs.row(n);
    for (Index c = 0; c < d_out; ++c) {
      const double g = grad_out(n, c);
      if (g == 0.0) continue;
      const auto& k = layer.kernels[static_cast<std::size_t>(c)];
      auto& gk = back.grad_layer.kernels[static_cast<std::size_t>(c)];
      gk.center_weights += g * features.row(n).transpose();
      back.grad_features.row(n) += g * k.center_weights.transpose();

      for (Index s = 0; s < s_count; ++s) {
        const Index j = forward.argmax[static_cast<std::size_t>((n * d_out + c) * s_count + s)];
        const Index nb = row[static_cast<std::size_t>(j)].id;
        const Vec3 u = offset_direction(p_n, cloud.point(nb));
        const Vec3 k_s = k.support_dirs.row(s).transpose();
        const double k_norm = k_s.norm();
        const Vec3 kh = k_s / k_norm;
        const double cosine = u.dot(kh);
        const double theta = dot(features.row(nb).data(), k.support_weights.row(s).data(), d_in);

        gk.support_weights.row(s) += (g * cosine) * features.row(nb);
        back.grad_features.row(nb) += (g * cosine) * k.support_weights.row(s);
        // d(u . k / |k|)/dk = (u - cosine * khat) / |k|
        gk.support_dirs.row(s) += ((g * theta / k_norm) * (u - cosine * kh)).transpose();
      }
    }
  }
  return back;
}

PoolResult graph_max_pool(const PointCloud& cloud, const FeatureMap& features, const NeighborIndex& nbrs,
                          Index keep, std::uint64_t seed) {
  const Index n_pts = cloud.size();
  if (features.rows() != n_pts) throw ShapeError("graph_max_pool: feature rows != point count");
  if (nbrs.rows() != n_pts) throw ShapeError("graph_max_pool: neighbor index built over a different cloud");
  if (keep < 1 || keep > n_pts) {
    throw std::invalid_argument("graph_max_pool: keep=" + std::to_string(keep) + " outside [1, " +
                                std::to_string(n_pts) + "]");
  }
  const Index dim = features.cols();
  Rng rng(seed);
  auto selected = sample_without_replacement(n_pts, keep, rng);
  std::sort(selected.begin(), selected.end());

  Points3 pts(keep, 3);
  FeatureMap pooled(keep, dim);
  std::vector<Index> source(static_cast<std::size_t>(keep * dim));
  for (Index r = 0; r < keep; ++r) {
    const Index centre = selected[static_cast<std::size_t>(r)];
    pts.row(r) = cloud.points().row(centre);
    const auto row = nbrs.row(centre);
    for (Index c = 0; c < dim; ++c) {
      double best = features(centre, c);
      Index best_src = centre;
      for (const auto& nb : row) {
        if (features(nb.id, c) > best) {
          best = features(nb.id, c);
          best_src = nb.id;
        }
      }
      pooled(r, c) = best;
      source[static_cast<std::size_t>(r * dim + c)] = best_src;
    }
  }
  std::vector<std::uint8_t> flags;
  if (cloud.has_labels()) {
    for (const Index i : selected) flags.push_back(cloud.outlier_flags()[static_cast<std::size_t>(i)]);
  }
  return {PointCloud(std::move(pts), std::move(flags)), std::move(pooled), std::move(selected), std::move(source)};
}

FeatureMap graph_max_pool_backward(const PoolResult& pooled, Index input_rows, const FeatureMap& grad_out) {
  const Index keep = pooled.features.rows();
  const Index dim = pooled.features.cols();
  if (grad_out.rows() != keep || grad_out.cols() != dim) throw ShapeError("graph_max_pool_backward: grad shape");
  FeatureMap grad = FeatureMap::Zero(input_rows, dim);
  for (Index r = 0; r < keep; ++r) {
    for (Index c = 0; c < dim; ++c) grad(pooled.source[static_cast<std::size_t>(r * dim + c)], c) += grad_out(r, c);
  }
  return grad;
}

}  // namespace hspose
