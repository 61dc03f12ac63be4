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

#ifndef HSPOSE_POINTCLOUD_HPP
#define HSPOSE_POINTCLOUD_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

#include "hspose/common.hpp"

namespace hspose {

/// N >= 1 points in meters with an optional per-point outlier flag used by
/// the noise experiments for bookkeeping. Immutable once constructed.
class PointCloud {
 public:
  explicit PointCloud(Points3 points);
  PointCloud(Points3 points, std::vector<std::uint8_t> outlier_flags);

  Index size() const { return points_.rows(); }
  const Points3& points() const { return points_; }
  Vec3 point(Index i) const { return points_.row(i).transpose(); }

  bool has_labels() const { return !outlier_flags_.empty(); }
  /// Empty when the cloud carries no labels.
  const std::vector<std::uint8_t>& outlier_flags() const { return outlier_flags_; }
  Index outlier_count() const;

 private:
  Points3 points_;
  std::vector<std::uint8_t> outlier_flags_;
};

/// Similarity-free object pose: p_world = R * (size .* p) + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 size = Vec3::Ones();

  /// Throws std::invalid_argument unless R is a rotation (||R^T R - I||_inf
  /// <= 1e-9, det > 0) and every size component is positive.
  void validate() const;
};

enum class ShapeKind { sphere, box, cylinder, mug, laptop };

/// Synthetic object description. Meaning of `dimensions` per kind:
///   sphere   {radius, -, -}
///   box      {extent_x, extent_y, extent_z}
///   cylinder {radius, height, -}          (both caps closed)
///   mug      {radius, height, handle}     (open top, closed bottom, handle arc)
///   laptop   {width, depth, open_angle}   (angle in radians, (0, pi])
struct ShapeSpec {
  ShapeKind kind = ShapeKind::sphere;
  std::array<double, 3> dimensions{1.0, 1.0, 1.0};
  std::uint64_t seed = 0;

  void validate() const;
};

ShapeKind parse_shape_kind(std::string_view name);
std::string_view shape_kind_name(ShapeKind kind);

enum class CloudFormat { ply_ascii, xyz_text };

/// Picks the format from the file extension (.ply, otherwise XYZ text).
CloudFormat format_from_path(const std::filesystem::path& path);

PointCloud load_pointcloud(const std::filesystem::path& path, CloudFormat format);
void save_pointcloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

/// Parsing/serialization on in-memory text; the file functions wrap these.
PointCloud parse_pointcloud(std::string_view text, CloudFormat format);
std::string format_pointcloud(const PointCloud& cloud, CloudFormat format);

/// Uniform area sampling of the shape surface, deterministic in spec.seed.
PointCloud generate_shape(const ShapeSpec& spec, Index n);

/// Returns the cloud shifted so its mean is the origin, and the mean removed.
std::pair<PointCloud, Vec3> center_to_mean(const PointCloud& cloud);

/// n distinct input points chosen by a seeded partial Fisher-Yates shuffle.
PointCloud random_downsample(const PointCloud& cloud, Index n, std::uint64_t seed);

PointCloud apply_pose(const PointCloud& cloud, const Pose& pose);
/// Inverse of apply_pose: p = (R^T (q - t)) ./ size.
PointCloud apply_inverse_pose(const PointCloud& cloud, const Pose& pose);

/// Number of points replaced for a given ratio: round-half-up of ratio * n.
Index outlier_count_for(double ratio, Index n);

/// Replaces outlier_count_for(ratio, N) object points with points drawn from
/// `background` and flags them. Replacement keeps N fixed.
PointCloud inject_outliers(const PointCloud& cloud, double ratio, const PointCloud* background,
                           std::uint64_t seed);

/// Rotation of `angle` radians about unit `axis` (Rodrigues).
Mat3 axis_angle(const Vec3& axis, double angle);

}  // namespace hspose

#endif  // HSPOSE_POINTCLOUD_HPP
