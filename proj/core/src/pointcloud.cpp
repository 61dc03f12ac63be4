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

#include "hspose/pointcloud.hpp"

#include <Eigen/Dense>

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "hspose/rng.hpp"

namespace hspose {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

double parse_double(std::string_view token, std::size_t line_no) {
  double value = 0.0;
  const auto* first = token.data();
  // from_chars rejects a leading '+'.
  if (!token.empty() && token.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
    throw ParseError("line " + std::to_string(line_no) + ": invalid coordinate '" +
                     std::string(token) + "'");
  }
  return value;
}

/// Splits text into lines, keeping 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> lines_of(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t line_no = 1;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.emplace_back(line_no++, text.substr(start, end - start));
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

PointCloud parse_xyz(std::string_view text) {
  std::vector<double> coords;
  for (const auto& [line_no, raw] : lines_of(text)) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tokens = split_ws(line);
    if (tokens.size() != 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 values, got " +
                       std::to_string(tokens.size()));
    }
    for (const auto& t : tokens) coords.push_back(parse_double(t, line_no));
  }
  if (coords.empty()) throw ParseError("point cloud is empty");
  Points3 pts(static_cast<Index>(coords.size() / 3), 3);
  std::copy(coords.begin(), coords.end(), pts.data());
  return PointCloud(std::move(pts));
}

PointCloud parse_ply(std::string_view text) {
  const auto lines = lines_of(text);
  std::size_t cursor = 0;
  auto next_header = [&]() -> std::pair<std::size_t, std::string_view> {
    if (cursor >= lines.size()) throw ParseError("unexpected end of PLY header");
    const auto& line = lines[cursor++];
    return {line.first, trim(line.second)};
  };

  if (next_header().second != "ply") throw ParseError("missing 'ply' magic line");

  long long vertex_count = -1;
  std::vector<std::string> properties;
  bool format_seen = false;
  bool in_vertex = false;
  for (;;) {
    const auto [line_no, line] = next_header();
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0] == "comment" || tokens[0] == "obj_info") continue;
    if (tokens[0] == "end_header") break;
    if (tokens[0] == "format") {
      if (tokens.size() < 2 || tokens[1] != "ascii") {
        throw ParseError("only ASCII PLY is supported (binary PLY rejected)");
      }
      format_seen = true;
    } else if (tokens[0] == "element") {
      if (tokens.size() != 3) throw ParseError("line " + std::to_string(line_no) + ": malformed element");
      if (tokens[1] != "vertex") {
        throw ParseError("line " + std::to_string(line_no) + ": unsupported element '" +
                         std::string(tokens[1]) + "'");
      }
      if (vertex_count >= 0) throw ParseError("duplicate vertex element");
      long long count = 0;
      const auto [ptr, ec] = std::from_chars(tokens[2].data(), tokens[2].data() + tokens[2].size(), count);
      if (ec != std::errc() || ptr != tokens[2].data() + tokens[2].size() || count < 0) {
        throw ParseError("line " + std::to_string(line_no) + ": invalid vertex count");
      }
      vertex_count = count;
      in_vertex = true;
    } else if (tokens[0] == "property") {
      if (!in_vertex || tokens.size() != 3) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed property");
      }
      if (tokens[1] != "float" && tokens[1] != "double" && tokens[1] != "float32" &&
          tokens[1] != "float64") {
        throw ParseError("line " + std::to_string(line_no) + ": unsupported property type");
      }
      properties.emplace_back(tokens[2]);
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": unexpected header line");
    }
  }
  if (!format_seen) throw ParseError("missing PLY format line");
  if (vertex_count < 0) throw ParseError("missing vertex element");
  if (properties != std::vector<std::string>{"x", "y", "z"}) {
    throw ParseError("vertex properties must be exactly x y z");
  }
  if (vertex_count == 0) throw ParseError("point cloud is empty");

  Points3 pts(vertex_count, 3);
  Index row = 0;
  for (; cursor < lines.size(); ++cursor) {
    const auto [line_no, raw] = lines[cursor];
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (row == vertex_count) {
      throw ParseError("line " + std::to_string(line_no) + ": more vertex rows than declared (" +
                       std::to_string(vertex_count) + ")");
    }
    const auto tokens = split_ws(line);
    if (tokens.size() != 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 values, got " +
                       std::to_string(tokens.size()));
    }
    for (int c = 0; c < 3; ++c) pts(row, c) = parse_double(tokens[static_cast<std::size_t>(c)], line_no);
    ++row;
  }
  if (row != vertex_count) {
    throw ParseError("declared " + std::to_string(vertex_count) + " vertices but found " +
                     std::to_string(row) + " rows");
  }
  return PointCloud(std::move(pts));
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string("shape dimension '") + what + "' must be positive");
  }
}

struct FaceChooser {
  std::vector<double> cumulative;
  explicit FaceChooser(std::initializer_list<double> areas) {
    double acc = 0.0;
    for (double a : areas) cumulative.push_back(acc += a);
  }
  std::size_t pick(Rng& rng) const {
    const double u = rng.uniform() * cumulative.back();
    for (std::size_t i = 0; i + 1 < cumulative.size(); ++i) {
      if (u < cumulative[i]) return i;
    }
    return cumulative.size() - 1;
  }
};

Vec3 sample_disk(Rng& rng, double radius, double z) {
  const double r = radius * std::sqrt(rng.uniform());
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  return {r * std::cos(phi), r * std::sin(phi), z};
}

Vec3 sample_tube_side(Rng& rng, double radius, double height) {
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  return {radius * std::cos(phi), radius * std::sin(phi), rng.uniform(-0.5 * height, 0.5 * height)};
}

}  // namespace

PointCloud::PointCloud(Points3 points) : points_(std::move(points)) {
  if (points_.rows() < 1) throw std::invalid_argument("PointCloud: at least one point required");
  if (!points_.allFinite()) throw std::invalid_argument("PointCloud: non-finite coordinate");
}

PointCloud::PointCloud(Points3 points, std::vector<std::uint8_t> outlier_flags)
    : PointCloud(std::move(points)) {
  if (!outlier_flags.empty() && static_cast<Index>(outlier_flags.size()) != points_.rows()) {
    throw ShapeError("PointCloud: label count must equal point count");
  }
  outlier_flags_ = std::move(outlier_flags);
}

Index PointCloud::outlier_count() const {
  Index count = 0;
  for (auto f : outlier_flags_) count += f ? 1 : 0;
  return count;
}

void Pose::validate() const {
  if (!rotation.allFinite() || !translation.allFinite() || !size.allFinite()) {
    throw std::invalid_argument("Pose: non-finite component");
  }
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9 || rotation.determinant() <= 0.0) {
    throw std::invalid_argument("Pose: rotation is not in SO(3)");
  }
  if ((size.array() <= 0.0).any()) throw std::invalid_argument("Pose: size must be positive");
}

void ShapeSpec::validate() const {
  switch (kind) {
    case ShapeKind::sphere:
      require_positive(dimensions[0], "radius");
      break;
    case ShapeKind::box:
      require_positive(dimensions[0], "extent_x");
      require_positive(dimensions[1], "extent_y");
      require_positive(dimensions[2], "extent_z");
      break;
    case ShapeKind::cylinder:
      require_positive(dimensions[0], "radius");
      require_positive(dimensions[1], "height");
      break;
    case ShapeKind::mug:
      require_positive(dimensions[0], "radius");
      require_positive(dimensions[1], "height");
      require_positive(dimensions[2], "handle");
      break;
    case ShapeKind::laptop:
      require_positive(dimensions[0], "width");
      require_positive(dimensions[1], "depth");
      require_positive(dimensions[2], "open_angle");
      if (dimensions[2] > std::numbers::pi) throw std::invalid_argument("laptop open_angle must be <= pi");
      break;
  }
}

ShapeKind parse_shape_kind(std::string_view name) {
  if (name == "sphere") return ShapeKind::sphere;
  if (name == "box") return ShapeKind::box;
  if (name == "cylinder") return ShapeKind::cylinder;
  if (name == "mug") return ShapeKind::mug;
  if (name == "laptop") return ShapeKind::laptop;
  throw std::invalid_argument("unknown shape kind '" + std::string(name) + "'");
}

std::string_view shape_kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::box: return "box";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::mug: return "mug";
    case ShapeKind::laptop: return "laptop";
  }
  return "unknown";
}

CloudFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".ply" ? CloudFormat::ply_ascii : CloudFormat::xyz_text;
}

PointCloud parse_pointcloud(std::string_view text, CloudFormat format) {
  return format == CloudFormat::ply_ascii ? parse_ply(text) : parse_xyz(text);
}

std::string format_pointcloud(const PointCloud& cloud, CloudFormat format) {
  std::string out;
  out.reserve(static_cast<std::size_t>(cloud.size()) * 72 + 128);
  if (format == CloudFormat::ply_ascii) {
    out += "ply\nformat ascii 1.0\nelement vertex ";
    out += std::to_string(cloud.size());
    out += "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  }
  const auto& pts = cloud.points();
  for (Index i = 0; i < pts.rows(); ++i) {
    append_real(out, pts(i, 0));
    out += ' ';
    append_real(out, pts(i, 1));
    out += ' ';
    append_real(out, pts(i, 2));
    out += '\n';
  }
  return out;
}

PointCloud load_pointcloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_pointcloud(buffer.str(), format);
}

void save_pointcloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto text = format_pointcloud(cloud, format);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

PointCloud generate_shape(const ShapeSpec& spec, Index n) {
  if (n < 8) throw std::invalid_argument("generate_shape: n must be at least 8");
  spec.validate();
  Rng rng(spec.seed);
  const auto& d = spec.dimensions;
  Points3 pts(n, 3);
  constexpr double pi = std::numbers::pi;

  switch (spec.kind) {
    case ShapeKind::sphere:
      for (Index i = 0; i < n; ++i) pts.row(i) = (d[0] * rng.unit_vector()).transpose();
      break;

    case ShapeKind::box: {
      const double ex = d[0], ey = d[1], ez = d[2];
      const FaceChooser faces{ey * ez, ey * ez, ex * ez, ex * ez, ex * ey, ex * ey};
      for (Index i = 0; i < n; ++i) {
        const auto f = faces.pick(rng);
        Vec3 p(rng.uniform(-0.5, 0.5) * ex, rng.uniform(-0.5, 0.5) * ey, rng.uniform(-0.5, 0.5) * ez);
        const auto axis = static_cast<int>(f / 2);
        const double sign = (f % 2 == 0) ? -0.5 : 0.5;
        p[axis] = sign * d[static_cast<std::size_t>(axis)];
        pts.row(i) = p.transpose();
      }
      break;
    }

    case ShapeKind::cylinder: {
      const double r = d[0], h = d[1];
      const FaceChooser faces{2.0 * pi * r * h, pi * r * r, pi * r * r};
      for (Index i = 0; i < n; ++i) {
        const auto f = faces.pick(rng);
        Vec3 p = f == 0 ? sample_tube_side(rng, r, h) : sample_disk(rng, r, f == 1 ? -0.5 * h : 0.5 * h);
        pts.row(i) = p.transpose();
      }
      break;
    }

    case ShapeKind::mug: {
      // Open-top cup with a half-torus handle on the +x side.
      const double r = d[0], h = d[1], a = d[2];
      const double tube = 0.2 * a;
      const FaceChooser faces{2.0 * pi * r * h, pi * r * r, 2.0 * pi * pi * tube * a};
      for (Index i = 0; i < n; ++i) {
        const auto f = faces.pick(rng);
        Vec3 p;
        if (f == 0) {
          p = sample_tube_side(rng, r, h);
        } else if (f == 1) {
          p = sample_disk(rng, r, -0.5 * h);
        } else {
          const double theta = rng.uniform(-0.5 * pi, 0.5 * pi);
          double psi = 0.0;
          // Area element is proportional to (a + tube cos psi).
          do {
            psi = 2.0 * pi * rng.uniform();
          } while (rng.uniform() * (a + tube) > a + tube * std::cos(psi));
          const Vec3 radial(std::cos(theta), 0.0, std::sin(theta));
          const Vec3 centre = Vec3(r, 0.0, 0.0) + a * radial;
          p = centre + tube * (std::cos(psi) * radial + std::sin(psi) * Vec3::UnitY());
        }
        pts.row(i) = p.transpose();
      }
      break;
    }

    case ShapeKind::laptop: {
      // Base occupies y in [0, depth] at z = 0; the lid pivots about the x axis.
      const double w = d[0], depth = d[1], angle = d[2];
      const Vec3 lid_dir(0.0, std::cos(angle), std::sin(angle));
      for (Index i = 0; i < n; ++i) {
        const bool lid = rng.uniform() < 0.5;
        const double x = rng.uniform(-0.5, 0.5) * w;
        const double v = rng.uniform() * depth;
        const Vec3 p = lid ? Vec3(x, 0.0, 0.0) + v * lid_dir : Vec3(x, v, 0.0);
        pts.row(i) = p.transpose();
      }
      break;
    }
  }
  return PointCloud(std::move(pts));
}

std::pair<PointCloud, Vec3> center_to_mean(const PointCloud& cloud) {
  const Vec3 mean = cloud.points().colwise().mean().transpose();
  Points3 pts = cloud.points().rowwise() - mean.transpose();
  return {PointCloud(std::move(pts), cloud.outlier_flags()), mean};
}

PointCloud random_downsample(const PointCloud& cloud, Index n, std::uint64_t seed) {
  const Index total = cloud.size();
  if (n < 1 || n > total) {
    throw std::invalid_argument("random_downsample: target count " + std::to_string(n) +
                                " outside [1, " + std::to_string(total) + "]");
  }
  Rng rng(seed);
  const auto order = sample_without_replacement(total, n, rng);
  Points3 pts(n, 3);
  std::vector<std::uint8_t> flags;
  if (cloud.has_labels()) flags.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    pts.row(i) = cloud.points().row(src);
    if (cloud.has_labels()) flags[static_cast<std::size_t>(i)] = cloud.outlier_flags()[static_cast<std::size_t>(src)];
  }
  return PointCloud(std::move(pts), std::move(flags));
}

PointCloud apply_pose(const PointCloud& cloud, const Pose& pose) {
  pose.validate();
  Points3 pts(cloud.size(), 3);
  for (Index i = 0; i < cloud.size(); ++i) {
    const Vec3 scaled = cloud.point(i).cwiseProduct(pose.size);
    pts.row(i) = (pose.rotation * scaled + pose.translation).transpose();
  }
  return PointCloud(std::move(pts), cloud.outlier_flags());
}

PointCloud apply_inverse_pose(const PointCloud& cloud, const Pose& pose) {
  pose.validate();
  Points3 pts(cloud.size(), 3);
  for (Index i = 0; i < cloud.size(); ++i) {
    const Vec3 local = pose.rotation.transpose() * (cloud.point(i) - pose.translation);
    pts.row(i) = local.cwiseQuotient(pose.size).transpose();
  }
  return PointCloud(std::move(pts), cloud.outlier_flags());
}

Index outlier_count_for(double ratio, Index n) {
  return static_cast<Index>(std::floor(ratio * static_cast<double>(n) + 0.5));
}

PointCloud inject_outliers(const PointCloud& cloud, double ratio, const PointCloud* background,
                           std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("inject_outliers: ratio must be in [0, 1)");
  const Index n = cloud.size();
  const Index k = outlier_count_for(ratio, n);
  if (k > 0 && background == nullptr) {
    throw std::invalid_argument("inject_outliers: background cloud required when ratio > 0");
  }
  Points3 pts = cloud.points();
  std::vector<std::uint8_t> flags(static_cast<std::size_t>(n), 0);
  if (k == 0) return PointCloud(std::move(pts), std::move(flags));

  Rng rng(seed);
  const auto targets = sample_without_replacement(n, k, rng);
  for (const Index target : targets) {
    const auto src = static_cast<Index>(rng.below(static_cast<std::uint64_t>(background->size())));
    pts.row(target) = background->points().row(src);
    flags[static_cast<std::size_t>(target)] = 1;
  }
  return PointCloud(std::move(pts), std::move(flags));
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace hspose
