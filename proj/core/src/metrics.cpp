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

#include "hspose/metrics.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "hspose/rng.hpp"

namespace hspose {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double clamped_acos_deg(double c) { return std::acos(std::clamp(c, -1.0, 1.0)) * kRadToDeg; }

struct Aabb {
  Vec3 lo;
  Vec3 hi;
};

Aabb bounds_of(const OrientedBox& box) {
  const Vec3 half = 0.5 * box.pose.size;
  // Half-extent of the rotated box along each world axis.
  const Vec3 reach = box.pose.rotation.cwiseAbs() * half;
  return {box.pose.translation - reach, box.pose.translation + reach};
}

}  // namespace

void OrientedBox::validate() const { pose.validate(); }

bool OrientedBox::contains(const Vec3& x) const {
  const Vec3 local = pose.rotation.transpose() * (x - pose.translation);
  const Vec3 half = 0.5 * pose.size;
  return std::abs(local.x()) <= half.x() && std::abs(local.y()) <= half.y() && std::abs(local.z()) <= half.z();
}

double rotation_error_deg(const Mat3& r_pred, const Mat3& r_gt, const Symmetry& symmetry) {
  if (symmetry.kind == Symmetry::Kind::axial) {
    // atan2 keeps small angles accurate where acos of a near-1 dot product does not.
    const Vec3 a = symmetry.axis.normalized();
    const Vec3 u = r_pred * a, v = r_gt * a;
    return std::atan2(u.cross(v).norm(), u.dot(v)) * 180.0 / std::numbers::pi;
  }
  return clamped_acos_deg(((r_pred.transpose() * r_gt).trace() - 1.0) / 2.0);
}

double translation_error_cm(const Vec3& t_pred, const Vec3& t_gt) { return 100.0 * (t_pred - t_gt).norm(); }

double iou3d_axis_aligned(const OrientedBox& a, const OrientedBox& b) {
  a.validate();
  b.validate();
  if (a.pose.rotation != Mat3::Identity() || b.pose.rotation != Mat3::Identity()) {
    throw std::invalid_argument("iou3d_axis_aligned: rotations must be the identity");
  }
  double inter = 1.0;
  for (int k = 0; k < 3; ++k) {
    const double lo = std::max(a.pose.translation[k] - 0.5 * a.pose.size[k], b.pose.translation[k] - 0.5 * b.pose.size[k]);
    const double hi = std::min(a.pose.translation[k] + 0.5 * a.pose.size[k], b.pose.translation[k] + 0.5 * b.pose.size[k]);
    inter *= std::max(0.0, hi - lo);
  }
  return inter / (a.volume() + b.volume() - inter);
}

double iou3d(const OrientedBox& a, const OrientedBox& b, Index samples, std::uint64_t seed) {
  a.validate();
  b.validate();
  if (a.pose.rotation == Mat3::Identity() && b.pose.rotation == Mat3::Identity()) return iou3d_axis_aligned(a, b);
  if (samples < 10000) throw std::invalid_argument("iou3d: need at least 10^4 samples");

  const auto ba = bounds_of(a);
  const auto bb = bounds_of(b);
  const Vec3 lo = ba.lo.cwiseMin(bb.lo);
  const Vec3 hi = ba.hi.cwiseMax(bb.hi);
  // Disjoint hulls cannot intersect.
  for (int k = 0; k < 3; ++k) {
    if (ba.hi[k] < bb.lo[k] || bb.hi[k] < ba.lo[k]) return 0.0;
  }

  Rng rng(seed);
  Index both = 0;
  for (Index i = 0; i < samples; ++i) {
    const Vec3 x(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), rng.uniform(lo.z(), hi.z()));
    if (a.contains(x) && b.contains(x)) ++both;
  }
  const double hull = (hi - lo).prod();
  const double inter = std::min({hull * static_cast<double>(both) / static_cast<double>(samples), a.volume(), b.volume()});
  return inter / (a.volume() + b.volume() - inter);
}

double threshold_accuracy(const std::vector<EvalRecord>& records, std::optional<double> rot_thresh_deg,
                          std::optional<double> trans_thresh_cm) {
  if (records.empty()) throw std::invalid_argument("threshold_accuracy: no records");
  Index hits = 0;
  for (const auto& r : records) {
    bool ok = true;
    if (rot_thresh_deg) {
      ok = ok && rotation_error_deg(r.predicted.rotation, r.ground_truth.rotation, r.symmetry) < *rot_thresh_deg;
    }
    if (trans_thresh_cm) {
      ok = ok && translation_error_cm(r.predicted.translation, r.ground_truth.translation) < *trans_thresh_cm;
    }
    if (ok) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double iou_map(const std::vector<EvalRecord>& records, double iou_threshold, Index samples, std::uint64_t seed) {
  if (records.empty()) throw std::invalid_argument("iou_map: no categories");
  std::map<std::string, std::pair<Index, Index>> per_category;  // hits, total
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const double iou = iou3d({r.predicted}, {r.ground_truth}, samples, mix_seed(seed, i));
    auto& [hits, total] = per_category[r.category];
    if (iou >= iou_threshold) ++hits;
    ++total;
  }
  double sum = 0.0;
  for (const auto& [name, counts] : per_category) {
    sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return sum / static_cast<double>(per_category.size());
}

MetricsReport evaluate(const std::vector<EvalRecord>& records, Index iou_samples, std::uint64_t seed) {
  if (records.empty()) throw std::invalid_argument("evaluate: no records");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].category].push_back(i);

  MetricsReport report;
  report.mean.name = "mean";
  for (const auto& [name, ids] : groups) {
    std::vector<EvalRecord> subset;
    std::vector<double> ious;
    for (const auto i : ids) {
      subset.push_back(records[i]);
      ious.push_back(iou3d({records[i].predicted}, {records[i].ground_truth}, iou_samples, mix_seed(seed, i)));
    }
    const auto frac_iou = [&](double t) {
      return static_cast<double>(std::count_if(ious.begin(), ious.end(), [t](double v) { return v >= t; })) /
             static_cast<double>(ious.size());
    };
    ScoreRow row{name, static_cast<Index>(ids.size()), {}};
    row.scores = {frac_iou(0.25),
                  frac_iou(0.50),
                  frac_iou(0.75),
                  threshold_accuracy(subset, 5.0, 2.0),
                  threshold_accuracy(subset, 5.0, 5.0),
                  threshold_accuracy(subset, 10.0, 2.0),
                  threshold_accuracy(subset, 10.0, 5.0),
                  threshold_accuracy(subset, std::nullopt, 2.0),
                  threshold_accuracy(subset, 5.0, std::nullopt)};
    report.mean.count += row.count;
    for (std::size_t c = 0; c < row.scores.size(); ++c) report.mean.scores[c] += row.scores[c];
    report.categories.push_back(std::move(row));
  }
  for (auto& s : report.mean.scores) s /= static_cast<double>(report.categories.size());
  return report;
}

std::string format_report(const MetricsReport& report) {
  std::size_t name_width = report.mean.name.size();
  for (const auto& row : report.categories) name_width = std::max(name_width, row.name.size());
  std::ostringstream out;
  auto pad = [&](std::string_view s, std::size_t width) {
    out << s;
    for (std::size_t i = s.size(); i < width; ++i) out << ' ';
  };
  pad("category", name_width + 2);
  pad("n", 7);
  for (const auto& col : kMetricColumns) pad(col, 10);
  out << '\n';
  auto write_row = [&](const ScoreRow& row) {
    pad(row.name, name_width + 2);
    pad(std::to_string(row.count), 7);
    for (const double s : row.scores) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%.4f", s);
      pad(buf, 10);
    }
    out << '\n';
  };
  for (const auto& row : report.categories) write_row(row);
  write_row(report.mean);
  return out.str();
}

namespace {

using nlohmann::json;

Vec3 read_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + ": expected 3 numbers");
  Vec3 v;
  for (int k = 0; k < 3; ++k) v[k] = j.at(static_cast<std::size_t>(k)).get<double>();
  if (!v.allFinite()) throw ParseError(std::string(what) + ": non-finite value");
  return v;
}

Pose read_pose(const json& j, const char* what) {
  const auto& r = j.at("R");
  if (!r.is_array() || r.size() != 9) throw ParseError(std::string(what) + ".R: expected 9 numbers");
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) m(i, k) = r.at(static_cast<std::size_t>(3 * i + k)).get<double>();
  if (!m.allFinite()) throw ParseError(std::string(what) + ".R: non-finite value");
  if ((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-4 || m.determinant() <= 0.0) {
    throw ParseError(std::string(what) + ".R is not a rotation");
  }
  Pose pose;
  if ((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-12) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    m = svd.matrixU() * svd.matrixV().transpose();
  }
  pose.rotation = m;
  pose.translation = read_vec3(j.at("t"), what);
  pose.size = read_vec3(j.at("s"), what);
  if ((pose.size.array() <= 0.0).any()) throw ParseError(std::string(what) + ".s must be positive");
  return pose;
}

json write_pose(const Pose& pose) {
  json r = json::array();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r.push_back(pose.rotation(i, k));
  return json{{"R", r},
              {"t", {pose.translation.x(), pose.translation.y(), pose.translation.z()}},
              {"s", {pose.size.x(), pose.size.y(), pose.size.z()}}};
}

}  // namespace

std::vector<EvalRecord> parse_records(std::string_view text) {
  std::vector<EvalRecord> records;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "record line " + std::to_string(line_no) + ": ";
    try {
      const auto j = json::parse(line);
      EvalRecord rec;
      rec.category = j.at("category").get<std::string>();
      const auto& sym = j.at("symmetry");
      if (sym.is_string() && sym.get<std::string>() == "none") {
        rec.symmetry = Symmetry::none();
      } else if (sym.is_object() && sym.contains("axial")) {
        const Vec3 axis = read_vec3(sym.at("axial"), "symmetry.axial");
        if (std::abs(axis.norm() - 1.0) > 1e-6) throw ParseError("symmetry axis must be unit length");
        rec.symmetry = Symmetry::axial(axis);
      } else {
        throw ParseError("symmetry must be \"none\" or {\"axial\": [x, y, z]}");
      }
      rec.predicted = read_pose(j.at("pred"), "pred");
      rec.ground_truth = read_pose(j.at("gt"), "gt");
      records.push_back(std::move(rec));
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    }
  }
  return records;
}

std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_records(ss.str());
}

std::string format_record(const EvalRecord& record) {
  nlohmann::json j;
  j["category"] = record.category;
  if (record.symmetry.kind == Symmetry::Kind::none) {
    j["symmetry"] = "none";
  } else {
    const auto& a = record.symmetry.axis;
    j["symmetry"] = {{"axial", {a.x(), a.y(), a.z()}}};
  }
  j["pred"] = write_pose(record.predicted);
  j["gt"] = write_pose(record.ground_truth);
  return j.dump();
}

}  // namespace hspose
