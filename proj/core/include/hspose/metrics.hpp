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

#ifndef HSPOSE_METRICS_HPP
#define HSPOSE_METRICS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hspose/common.hpp"
#include "hspose/pointcloud.hpp"

namespace hspose {

/// Box with full extents `pose.size` along the rotated axes.
struct OrientedBox {
  Pose pose;

  void validate() const;
  double volume() const { return pose.size.prod(); }
  bool contains(const Vec3& x) const;
};

struct Symmetry {
  enum class Kind { none, axial };
  Kind kind = Kind::none;
  Vec3 axis = Vec3::UnitZ();

  static Symmetry none() { return {}; }
  static Symmetry axial(const Vec3& axis) { return {Kind::axial, axis}; }
};

struct EvalRecord {
  std::string category;
  Symmetry symmetry;
  Pose predicted;
  Pose ground_truth;
};

/// Geodesic angle between the rotations, or for an axial symmetry the angle
/// between the two images of the axis.
double rotation_error_deg(const Mat3& r_pred, const Mat3& r_gt, const Symmetry& symmetry = {});
double translation_error_cm(const Vec3& t_pred, const Vec3& t_gt);

/// Exact IoU; both rotations must be the identity.
double iou3d_axis_aligned(const OrientedBox& a, const OrientedBox& b);

/// Monte-Carlo IoU: `samples` uniform points in the axis-aligned hull of both
/// boxes estimate the intersection volume; the box volumes are exact.
/// Boxes whose rotations are both exactly the identity take the exact path.
double iou3d(const OrientedBox& a, const OrientedBox& b, Index samples = 100000, std::uint64_t seed = 0);

/// Fraction of records with rotation error < rot (if set) and translation
/// error < trans (if set). Throws on empty input.
double threshold_accuracy(const std::vector<EvalRecord>& records, std::optional<double> rot_thresh_deg,
                          std::optional<double> trans_thresh_cm);

/// Mean over categories of the fraction of instances with IoU >= threshold.
/// Record i uses IoU seed mix_seed(seed, i).
double iou_map(const std::vector<EvalRecord>& records, double iou_threshold, Index samples = 100000,
               std::uint64_t seed = 0);

inline constexpr std::array<std::string_view, 9> kMetricColumns = {
    "IoU25", "IoU50", "IoU75", "5deg2cm", "5deg5cm", "10deg2cm", "10deg5cm", "2cm", "5deg"};

struct ScoreRow {
  std::string name;
  Index count = 0;
  std::array<double, 9> scores{};
};

/// Per-category rows in name order; `mean` averages them column-wise.
struct MetricsReport {
  std::vector<ScoreRow> categories;
  ScoreRow mean;
};

MetricsReport evaluate(const std::vector<EvalRecord>& records, Index iou_samples = 100000, std::uint64_t seed = 0);
std::string format_report(const MetricsReport& report);

/// One JSON object per line:
/// {"category": "mug", "symmetry": "none" | {"axial": [x, y, z]},
///  "pred": {"R": [9 row-major], "t": [3], "s": [3]}, "gt": {...}}
/// Blank lines are skipped. Rotations off SO(3) by more than 1e-4 are
/// rejected; smaller drift is projected back.
std::vector<EvalRecord> parse_records(std::string_view text);
std::vector<EvalRecord> load_records(const std::filesystem::path& path);
std::string format_record(const EvalRecord& record);

}  // namespace hspose

#endif  // HSPOSE_METRICS_HPP
