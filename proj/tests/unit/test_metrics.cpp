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

#include <cmath>
#include <fstream>

#include "hspose/metrics.hpp"
#include "support.hpp"

using namespace hspose;

namespace {

OrientedBox box(const Vec3& t, const Vec3& s, const Mat3& r = Mat3::Identity()) { return {Pose{r, t, s}}; }

Mat3 random_rotation(Rng& rng) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  return axis_angle(axis.normalized(), rng.uniform(0.0, M_PI));
}

EvalRecord record(const std::string& cat, double rot_deg, double trans_cm) {
  EvalRecord r;
  r.category = cat;
  r.ground_truth.size = Vec3(0.1, 0.1, 0.1);
  r.predicted = r.ground_truth;
  r.predicted.rotation = axis_angle(Vec3::UnitZ(), rot_deg * M_PI / 180.0);
  r.predicted.translation = Vec3(trans_cm / 100.0, 0.0, 0.0);
  return r;
}

// Axis-aligned overlap by hand: product of per-axis interval intersections.
double aabb_iou_oracle(const Vec3& ta, const Vec3& sa, const Vec3& tb, const Vec3& sb) {
  double inter = 1.0;
  for (int k = 0; k < 3; ++k) {
    const double lo = std::max(ta[k] - sa[k] / 2, tb[k] - sb[k] / 2);
    const double hi = std::min(ta[k] + sa[k] / 2, tb[k] + sb[k] / 2);
    inter *= std::max(0.0, hi - lo);
  }
  return inter / (sa.prod() + sb.prod() - inter);
}

}  // namespace

TEST_CASE("rotation error") {
  Rng rng(1);
  const Mat3 r = random_rotation(rng);
  CHECK(rotation_error_deg(r, r) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(rotation_error_deg(axis_angle(Vec3::UnitZ(), M_PI / 6), Mat3::Identity()) == doctest::Approx(30.0));

  const Vec3 axis = Vec3(0.2, 0.3, 0.9).normalized();
  const Mat3 flip = axis_angle(axis, M_PI);
  CHECK(rotation_error_deg(flip, Mat3::Identity()) == doctest::Approx(180.0));
  CHECK(rotation_error_deg(flip, Mat3::Identity(), Symmetry::axial(axis)) < 1e-6);
  for (int i = 0; i < 20; ++i) {
    const double theta = rng.uniform(-M_PI, M_PI);
    CHECK(rotation_error_deg(r, r * axis_angle(axis, theta), Symmetry::axial(axis)) < 1e-6);
  }
  // Tilting the symmetry axis still counts.
  CHECK(rotation_error_deg(axis_angle(Vec3::UnitX(), 0.1), Mat3::Identity(), Symmetry::axial(Vec3::UnitZ())) ==
        doctest::Approx(0.1 * 180.0 / M_PI));
}

TEST_CASE("translation error") {
  CHECK(translation_error_cm(Vec3::Zero(), Vec3::Zero()) == 0.0);
  CHECK(translation_error_cm(Vec3::Zero(), Vec3(0.02, 0, 0)) == doctest::Approx(2.0));
  CHECK(translation_error_cm(Vec3(0.01, 0.02, -0.02), Vec3::Zero()) == doctest::Approx(3.0));
}

TEST_CASE("exact axis-aligned iou") {
  const auto a = box(Vec3::Zero(), Vec3::Ones());
  CHECK(iou3d(a, a) == 1.0);
  CHECK(iou3d(a, box(Vec3(0.5, 0, 0), Vec3::Ones())) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(iou3d(a, box(Vec3(3, 0, 0), Vec3::Ones())) == 0.0);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const Vec3 ta(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3 tb(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3 sa(rng.uniform(0.2, 2), rng.uniform(0.2, 2), rng.uniform(0.2, 2));
    const Vec3 sb(rng.uniform(0.2, 2), rng.uniform(0.2, 2), rng.uniform(0.2, 2));
    const auto x = box(ta, sa), y = box(tb, sb);
    CHECK(iou3d(x, y) == doctest::Approx(aabb_iou_oracle(ta, sa, tb, sb)).epsilon(1e-12));
    CHECK(iou3d(x, y) == iou3d(y, x));
  }
  CHECK_THROWS(iou3d(a, box(Vec3::Zero(), Vec3(1, 0, 1))));
  CHECK_THROWS(iou3d(a, box(Vec3(0.1, 0, 0), Vec3::Ones(), axis_angle(Vec3::UnitZ(), 0.3)), 1000));
}

TEST_CASE("monte-carlo iou") {
  // A rotation by a multiple of 90 degrees about z leaves a cube unchanged but takes the sampled path.
  const Mat3 quarter = axis_angle(Vec3::UnitZ(), M_PI / 2);
  const auto a = box(Vec3::Zero(), Vec3::Ones(), quarter);
  const auto b = box(Vec3(0.5, 0, 0), Vec3::Ones(), quarter);
  CHECK(std::abs(iou3d(a, a, 100000, 4) - 1.0) <= 0.01);
  CHECK(std::abs(iou3d(a, b, 100000, 4) - 1.0 / 3.0) <= 0.01);
  CHECK(iou3d(a, b, 100000, 4) == iou3d(a, b, 100000, 4));
  CHECK(iou3d(a, box(Vec3(5, 0, 0), Vec3::Ones(), quarter)) == 0.0);

  int within = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed)
    if (std::abs(iou3d(a, b, 100000, seed) - 1.0 / 3.0) <= 0.01) ++within;
  CHECK(within >= 38);

  // Common rigid motion and argument order.
  Rng rng(5);
  for (int i = 0; i < 5; ++i) {
    const Mat3 r0 = random_rotation(rng);
    const auto x = box(Vec3(0.1, 0.0, 0.05), Vec3(0.5, 0.4, 0.3), r0);
    const auto y = box(Vec3(-0.05, 0.1, 0.0), Vec3(0.4, 0.5, 0.2), r0 * axis_angle(Vec3::UnitX(), 0.4));
    const Mat3 g = random_rotation(rng);
    const Vec3 t(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const auto xg = box(g * x.pose.translation + t, x.pose.size, g * x.pose.rotation);
    const auto yg = box(g * y.pose.translation + t, y.pose.size, g * y.pose.rotation);
    const double base = iou3d(x, y, 100000, 1);
    CHECK(std::abs(iou3d(y, x, 100000, 2) - base) <= 0.01);
    CHECK(std::abs(iou3d(xg, yg, 100000, 3) - base) <= 0.01);
  }
}

TEST_CASE("threshold accuracy") {
  std::vector<EvalRecord> perfect{record("a", 0, 0), record("b", 0, 0)};
  CHECK(threshold_accuracy(perfect, 5.0, 2.0) == 1.0);
  CHECK(threshold_accuracy(perfect, std::nullopt, 2.0) == 1.0);

  CHECK(threshold_accuracy({record("a", 0, 2.0)}, std::nullopt, 2.0) == 0.0);
  CHECK(threshold_accuracy({record("a", 0, 1.999)}, std::nullopt, 2.0) == 1.0);

  // rot (deg), trans (cm) against 5deg2cm / 10deg5cm / 5deg / 2cm.
  const std::vector<std::pair<double, double>> cases{{1, 1},  {4, 3},  {6, 1},   {9, 4},  {12, 0.5},
                                                     {2, 6},  {0, 0},  {4.9, 1.9}, {8, 8}, {20, 20}};
  std::vector<EvalRecord> mixed;
  for (const auto& [r, t] : cases) mixed.push_back(record("m", r, t));
  CHECK(threshold_accuracy(mixed, 5.0, 2.0) == doctest::Approx(3.0 / 10));
  CHECK(threshold_accuracy(mixed, 10.0, 5.0) == doctest::Approx(6.0 / 10));
  CHECK(threshold_accuracy(mixed, 5.0, std::nullopt) == doctest::Approx(5.0 / 10));
  CHECK(threshold_accuracy(mixed, std::nullopt, 2.0) == doctest::Approx(5.0 / 10));
  CHECK_THROWS(threshold_accuracy({}, 5.0, 2.0));
}

TEST_CASE("iou map averages categories") {
  std::vector<EvalRecord> recs{record("a", 0, 0), record("a", 0, 0), record("b", 0, 0), record("b", 0, 0)};
  CHECK(iou_map(recs, 0.75) == 1.0);
  recs[3].predicted.translation = Vec3(5, 0, 0);
  CHECK(iou_map(recs, 0.75) == doctest::Approx(0.75));
  for (auto& r : recs) r.predicted.translation = Vec3(5, 0, 0);
  CHECK(iou_map(recs, 0.25) == 0.0);
  CHECK_THROWS(iou_map({}, 0.5));
}

TEST_CASE("report and records") {
  std::vector<EvalRecord> recs{record("bowl", 0, 0), record("mug", 3, 1), record("mug", 30, 10)};
  recs[0].symmetry = Symmetry::axial(Vec3::UnitZ());
  recs[0].predicted.rotation = axis_angle(Vec3::UnitZ(), 2.0);
  const auto report = evaluate(recs, 20000);
  REQUIRE(report.categories.size() == 2);
  for (const auto& row : report.categories)
    for (double s : row.scores) CHECK((s >= 0.0 && s <= 1.0));
  for (std::size_t c = 0; c < kMetricColumns.size(); ++c)
    CHECK(report.mean.scores[c] ==
          doctest::Approx((report.categories[0].scores[c] + report.categories[1].scores[c]) / 2));
  CHECK(report.categories[0].scores[3] == 1.0);
  const auto table = format_report(report);
  for (auto col : kMetricColumns) CHECK(table.find(col) != std::string::npos);

  std::string text;
  for (const auto& r : recs) text += format_record(r) + "\n";
  const auto back = parse_records(text);
  REQUIRE(back.size() == 3);
  CHECK(back[0].symmetry.kind == Symmetry::Kind::axial);
  CHECK(back[2].predicted.rotation == recs[2].predicted.rotation);
  CHECK(back[2].predicted.translation == recs[2].predicted.translation);

  const auto path = test::scratch_dir("metrics") / "r.jsonl";
  std::ofstream(path) << text;
  CHECK(load_records(path).size() == 3);

  auto bad = format_record(recs[1]);
  bad.replace(bad.find("\"R\":[") + 5, 1, "5");
  try {
    parse_records(text + bad + "\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_records("{\"category\": \"x\"}\n"), ParseError);
}
