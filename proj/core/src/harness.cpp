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

#include "hspose/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "hspose/neighbors.hpp"
#include "hspose/rng.hpp"

namespace hspose {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t word) {
  for (int b = 0; b < 8; ++b) {
    h ^= (word >> (8 * b)) & 0xffU;
    h *= kFnvPrime;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

bool is_neighbor_variable(SweepVariable v) { return v != SweepVariable::outlier_ratio; }

std::vector<Sample> perturbed_set(const std::vector<Sample>& clean, double ratio, std::uint64_t noise_seed) {
  std::vector<Sample> out = clean;
  for (std::size_t j = 0; j < out.size(); ++j) out[j].cloud = perturb_cloud(clean[j].cloud, ratio, mix_seed(noise_seed, j));
  return out;
}

PointCloud random_cloud(Index n, Rng& rng) {
  Points3 pts(n, 3);
  for (Index i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) pts(i, k) = rng.uniform(-0.5, 0.5);
  return PointCloud(std::move(pts));
}

PointCloud transformed(const PointCloud& cloud, double scale, const Vec3& shift) {
  Points3 pts = cloud.points();
  for (Index i = 0; i < pts.rows(); ++i) pts.row(i) = scale * pts.row(i) + shift.transpose();
  return PointCloud(std::move(pts));
}

double max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

SweepVariable parse_sweep_variable(std::string_view name) {
  if (name == "outlier_ratio") return SweepVariable::outlier_ratio;
  if (name == "m_rff") return SweepVariable::m_rff;
  if (name == "m_orl") return SweepVariable::m_orl;
  if (name == "m_both") return SweepVariable::m_both;
  throw std::invalid_argument("unknown sweep variable '" + std::string(name) + "'");
}

std::string_view sweep_variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::outlier_ratio: return "outlier_ratio";
    case SweepVariable::m_rff: return "m_rff";
    case SweepVariable::m_orl: return "m_orl";
    case SweepVariable::m_both: return "m_both";
  }
  return "?";
}

void SweepSpec::validate() const {
  if (values.empty()) throw std::invalid_argument("sweep: no values");
  if (trials < 1) throw std::invalid_argument("sweep: trials must be >= 1");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > values[i - 1])) throw std::invalid_argument("sweep: values must be strictly increasing");
  }
  for (const double v : values) {
    if (variable == SweepVariable::outlier_ratio) {
      if (!(v >= 0.0 && v < 1.0)) throw std::invalid_argument("sweep: outlier ratio must be in [0, 1)");
    } else if (v != std::floor(v) || v < 1.0 || v > static_cast<double>(task.points - 1)) {
      throw std::invalid_argument("sweep: neighbor count must be an integer in [1, N-1]");
    }
  }
}

TrialSeeds trial_seeds(std::uint64_t sweep_seed, Index trial) {
  TrialSeeds s;
  s.trial = mix_seed(sweep_seed, static_cast<std::uint64_t>(trial));
  s.train_data = mix_seed(s.trial, 1);
  s.test_data = mix_seed(s.trial, 2);
  s.params = mix_seed(s.trial, 3);
  s.shuffle = mix_seed(s.trial, 4);
  return s;
}

Model init_model(const EncoderSpec& spec, const TrialSeeds& seeds) {
  Model model{build_encoder(spec, seeds.params), {}};
  Rng rng(mix_seed(seeds.params, 0x4eadULL));
  model.head = LinearMap::random(model.encoder.d_out(), 3, rng);
  return model;
}

PointCloud make_background(const PointCloud& object, Index count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("make_background: count must be >= 1");
  const Vec3 lo = object.points().colwise().minCoeff().transpose().array() - 0.3;
  const Vec3 hi = object.points().colwise().maxCoeff().transpose().array() + 0.3;
  const double plane_z = lo.z() + 0.3 - 0.02;
  Rng rng(seed);
  Points3 pts(count, 3);
  for (Index i = 0; i < count; ++i) {
    pts(i, 0) = rng.uniform(lo.x(), hi.x());
    pts(i, 1) = rng.uniform(lo.y(), hi.y());
    pts(i, 2) = i % 2 == 0 ? plane_z : rng.uniform(lo.z(), hi.z());
  }
  return PointCloud(std::move(pts));
}

PointCloud perturb_cloud(const PointCloud& cloud, double ratio, std::uint64_t seed) {
  if (outlier_count_for(ratio, cloud.size()) == 0) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("perturb_cloud: ratio must be in [0, 1)");
    return cloud;
  }
  const auto background = make_background(cloud, cloud.size(), mix_seed(seed, 0xb6ULL));
  const auto noisy = inject_outliers(cloud, ratio, &background, seed);
  auto centred = center_to_mean(noisy).first;
  return PointCloud(centred.points(), noisy.outlier_flags());
}

std::uint64_t cloud_hash(const PointCloud& cloud) {
  std::uint64_t h = kFnvOffset;
  h = fnv_mix(h, static_cast<std::uint64_t>(cloud.size()));
  const auto& pts = cloud.points();
  for (Index i = 0; i < pts.size(); ++i) h = fnv_mix(h, std::bit_cast<std::uint64_t>(pts.data()[i]));
  return h;
}

std::uint64_t samples_hash(const std::vector<Sample>& samples) {
  std::uint64_t h = kFnvOffset;
  for (const auto& s : samples) h = fnv_mix(h, cloud_hash(s.cloud));
  return h;
}

NoiseSweepResult run_noise_sweep(const SweepSpec& spec) {
  if (spec.variable != SweepVariable::outlier_ratio) throw std::invalid_argument("noise sweep: variable must be outlier_ratio");
  spec.validate();
  EncoderSpec hs_spec = spec.base;
  hs_spec.variant = EncoderVariant::hs;

  NoiseSweepResult result;
  result.ratios = spec.values;
  std::vector<std::vector<double>> hs_err(spec.values.size()), gc_err(spec.values.size());
  std::vector<double> hs_rise, gc_rise;

  for (Index t = 0; t < spec.trials; ++t) {
    const auto seeds = trial_seeds(spec.seed, t);
    ToyTask task = spec.task;
    task.train_seed = seeds.train_data;
    task.test_seed = seeds.test_data;
    const auto train = make_samples(task, true);
    const auto test = make_samples(task, false);

    const Model hs_init = init_model(hs_spec, seeds);
    Model gc_init = hs_init;
    make_plain_gc(gc_init.encoder);
    TrainOptions opts = spec.train;
    opts.seed = seeds.shuffle;
    const Model hs = train_on_samples(train, {}, hs_init, opts).model;
    const Model gc = train_on_samples(train, {}, gc_init, opts).model;

    for (std::size_t r = 0; r < spec.values.size(); ++r) {
      NoiseRow row;
      row.trial = t;
      row.trial_seed = seeds.trial;
      row.ratio = spec.values[r];
      row.noise_seed = mix_seed(seeds.trial, std::bit_cast<std::uint64_t>(row.ratio));
      const auto noisy = perturbed_set(test, row.ratio, row.noise_seed);
      row.input_hash = samples_hash(noisy);
      row.hs_error_deg = evaluate_median_error(hs, noisy);
      if (samples_hash(noisy) != row.input_hash) throw std::logic_error("noise sweep: test inputs changed between variants");
      row.gc_error_deg = evaluate_median_error(gc, noisy);
      hs_err[r].push_back(row.hs_error_deg);
      gc_err[r].push_back(row.gc_error_deg);
      result.rows.push_back(row);
    }
    hs_rise.push_back(hs_err.back().back() - hs_err.front().back());
    gc_rise.push_back(gc_err.back().back() - gc_err.front().back());
  }
  for (std::size_t r = 0; r < spec.values.size(); ++r) {
    result.hs_median.push_back(median(hs_err[r]));
    result.gc_median.push_back(median(gc_err[r]));
  }
  result.hs_increase = median(hs_rise);
  result.gc_increase = median(gc_rise);
  return result;
}

std::string noise_sweep_csv(const NoiseSweepResult& result) {
  std::string out = "trial,trial_seed,ratio,noise_seed,hs_error_deg,gc_error_deg,input_hash\n";
  for (const auto& r : result.rows) {
    out += std::to_string(r.trial) + ',' + std::to_string(r.trial_seed) + ',';
    append_real(out, r.ratio);
    out += ',' + std::to_string(r.noise_seed) + ',';
    append_real(out, r.hs_error_deg);
    out += ',';
    append_real(out, r.gc_error_deg);
    out += ',' + hex(r.input_hash) + '\n';
  }
  return out;
}

std::string noise_sweep_summary(const NoiseSweepResult& result) {
  std::ostringstream out;
  out << "noise sweep: full HS-encoder vs plain-GC ablation of the same code (STE and ORL off, RF-P only)\n";
  out << "median test up-axis error in degrees over " << (result.ratios.empty() ? 0 : result.rows.size() / result.ratios.size())
      << " trials\n";
  out << "ratio    hs        plain_gc\n";
  for (std::size_t r = 0; r < result.ratios.size(); ++r) {
    out << fixed(result.ratios[r], 2) << "     " << fixed(result.hs_median[r], 3) << "    " << fixed(result.gc_median[r], 3)
        << '\n';
  }
  out << "median increase: hs " << fixed(result.hs_increase, 3) << ", plain_gc " << fixed(result.gc_increase, 3)
      << (result.hs_steadier() ? "  (hs steadier)" : "  (hs not steadier)") << '\n';
  return out.str();
}

void set_neighbor_count(EncoderSpec& spec, SweepVariable variable, Index m) {
  if (!is_neighbor_variable(variable)) throw std::invalid_argument("set_neighbor_count: not a neighbor variable");
  for (auto& layer : spec.layers) {
    if (variable != SweepVariable::m_orl) layer.m_rff = m;
    if (variable != SweepVariable::m_rff) layer.m_orl = m;
  }
}

double time_forward_ms(const EncoderConfig& cfg, const PointCloud& cloud, int runs, int warmups) {
  if (runs < 1) throw std::invalid_argument("time_forward_ms: runs must be >= 1");
  for (int i = 0; i < warmups; ++i) (void)hs_encoder_forward(cloud, cfg);
  std::vector<double> ms;
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto fwd = hs_encoder_forward(cloud, cfg);
    const auto t1 = std::chrono::steady_clock::now();
    if (fwd.features.size() == 0) throw std::logic_error("empty forward");
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return median(ms);
}

NeighborSweepResult run_neighbor_sweep(const SweepSpec& spec) {
  if (!is_neighbor_variable(spec.variable)) throw std::invalid_argument("neighbor sweep: variable must be m_rff, m_orl or m_both");
  spec.validate();
  NeighborSweepResult result;
  result.variable = spec.variable;
  for (const double value : spec.values) {
    for (Index t = 0; t < spec.trials; ++t) {
      const auto seeds = trial_seeds(spec.seed, t);
      ToyTask task = spec.task;
      task.train_seed = seeds.train_data;
      task.test_seed = seeds.test_data;
      const auto train = make_samples(task, true);
      const auto test = make_samples(task, false);
      EncoderSpec es = spec.base;
      set_neighbor_count(es, spec.variable, static_cast<Index>(value));
      TrainOptions opts = spec.train;
      opts.seed = seeds.shuffle;
      const auto trained = train_on_samples(train, test, init_model(es, seeds), opts);

      NeighborRow row{value, t, seeds.trial, trained.test_median_error_deg, std::nullopt};
      if (spec.timing) row.forward_ms = time_forward_ms(trained.model.encoder, test.front().cloud);
      result.rows.push_back(row);
    }
  }
  return result;
}

std::string neighbor_sweep_csv(const NeighborSweepResult& result) {
  const bool timing = !result.rows.empty() && result.rows.front().forward_ms.has_value();
  std::string out = "variable,value,trial,trial_seed,error_deg";
  out += timing ? ",forward_ms\n" : "\n";
  for (const auto& r : result.rows) {
    out += std::string(sweep_variable_name(result.variable)) + ',' + std::to_string(static_cast<Index>(r.value)) + ',' +
           std::to_string(r.trial) + ',' + std::to_string(r.trial_seed) + ',';
    append_real(out, r.error_deg);
    if (timing) {
      out += ',';
      append_real(out, r.forward_ms.value_or(0.0));
    }
    out += '\n';
  }
  return out;
}

std::string neighbor_sweep_summary(const NeighborSweepResult& result) {
  std::ostringstream out;
  out << "neighbor sweep over " << sweep_variable_name(result.variable) << '\n';
  out << "value    median_error_deg" << (result.rows.empty() || !result.rows.front().forward_ms ? "" : "    median_forward_ms")
      << '\n';
  std::size_t i = 0;
  while (i < result.rows.size()) {
    std::size_t j = i;
    std::vector<double> errs, ms;
    while (j < result.rows.size() && result.rows[j].value == result.rows[i].value) {
      errs.push_back(result.rows[j].error_deg);
      if (result.rows[j].forward_ms) ms.push_back(*result.rows[j].forward_ms);
      ++j;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-8lld %-19.3f", static_cast<long long>(result.rows[i].value), median(errs));
    out << buf;
    if (!ms.empty()) out << fixed(median(ms), 3);
    out << '\n';
    i = j;
  }
  return out.str();
}

std::string_view status_name(CheckResult::Status s) {
  switch (s) {
    case CheckResult::Status::pass: return "pass";
    case CheckResult::Status::fail: return "fail";
    case CheckResult::Status::skipped: return "skipped";
  }
  return "?";
}

bool InvarianceReport::passed() const {
  return std::none_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.status == CheckResult::Status::fail; });
}

const CheckResult& InvarianceReport::at(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no invariance check named '" + std::string(name) + "'");
}

InvarianceReport run_invariance_suite(const EncoderConfig& cfg, std::uint64_t seed, const InvarianceOptions& options) {
  cfg.validate();
  using Status = CheckResult::Status;
  constexpr double kTol = 1e-9;
  Rng rng(seed);
  InvarianceReport report;
  const HSLayerParams& first = cfg.layers.front();
  const PointCloud cloud = random_cloud(options.points, rng);

  HSLayerParams geometric = first;
  geometric.use_ste = false;
  const FeatureMap base = hs_layer_forward(cloud, {}, geometric).output;

  {
    CheckResult c{"gc_translation_invariance", Status::pass, 0.0, ""};
    for (Index i = 0; i < options.transforms; ++i) {
      const Vec3 shift = rng.unit_vector() * rng.uniform(0.0, 10.0);
      c.max_deviation = std::max(c.max_deviation, max_abs_diff(hs_layer_forward(transformed(cloud, 1.0, shift), {}, geometric).output, base));
    }
    c.status = c.max_deviation <= kTol ? Status::pass : Status::fail;
    c.detail = std::to_string(options.transforms) + " translations, |t| <= 10";
    report.checks.push_back(c);
  }
  {
    CheckResult c{"gc_scale_invariance", Status::pass, 0.0, ""};
    for (Index i = 0; i < options.transforms; ++i) {
      const double scale = std::exp(rng.uniform(std::log(0.01), std::log(100.0)));
      c.max_deviation = std::max(c.max_deviation, max_abs_diff(hs_layer_forward(transformed(cloud, scale, Vec3::Zero()), {}, geometric).output, base));
    }
    c.status = c.max_deviation <= kTol ? Status::pass : Status::fail;
    c.detail = std::to_string(options.transforms) + " scalings in [0.01, 100]";
    report.checks.push_back(c);
  }
  {
    CheckResult c{"ste_breaks_invariance", Status::skipped, 0.0, ""};
    if (!first.use_ste || first.ste.weights.cwiseAbs().maxCoeff() == 0.0) {
      c.detail = "first-layer STE disabled or zero";
    } else {
      const FeatureMap moved = hs_layer_forward(transformed(cloud, 1.0, Vec3::UnitX()), {}, first).output;
      c.max_deviation = max_abs_diff(moved, hs_layer_forward(cloud, {}, first).output);
      c.status = c.max_deviation > 1e-6 ? Status::pass : Status::fail;
      c.detail = "translation by (1, 0, 0) must move some output entry by > 1e-6";
    }
    report.checks.push_back(c);
  }
  {
    CheckResult c{"first_layer_rf_p", Status::pass, 0.0, ""};
    Index mismatches = 0;
    for (Index k = 0; k < options.clouds; ++k) {
      const auto n = static_cast<Index>(first.m_rff + 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(options.points))));
      const auto pc = random_cloud(n, rng);
      const auto fwd = hs_layer_forward(pc, {}, first);
      const auto oracle = knn_bruteforce(pc, first.m_rff);
      if (!(fwd.rf == oracle)) ++mismatches;
    }
    c.max_deviation = static_cast<double>(mismatches);
    c.status = mismatches == 0 ? Status::pass : Status::fail;
    c.detail = std::to_string(options.clouds) + " clouds, deviation = clouds with differing neighbor sets";
    report.checks.push_back(c);
  }
  {
    CheckResult c{"orl_residual_identity", Status::pass, 0.0, ""};
    for (const auto& layer : cfg.layers) {
      const Index d = layer.d_out();
      FeatureMap f(cloud.size(), d);
      for (Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-2.0, 2.0);
      const auto out = orl_forward(cloud, f, knn_points(cloud, layer.m_orl), LinearMap::zeros(2 * d, d)).output;
      c.max_deviation = std::max(c.max_deviation, max_abs_diff(out, f));
    }
    c.status = c.max_deviation == 0.0 ? Status::pass : Status::fail;
    c.detail = "bit-exact";
    report.checks.push_back(c);
  }
  {
    CheckResult c{"permutation_equivariance", Status::pass, 0.0, ""};
    const auto perm = sample_without_replacement(cloud.size(), cloud.size(), rng);
    Points3 shuffled(cloud.size(), 3);
    for (Index i = 0; i < cloud.size(); ++i) shuffled.row(i) = cloud.points().row(perm[static_cast<std::size_t>(i)]);
    const PointCloud permuted(std::move(shuffled));
    FeatureMap f, fp;
    for (const auto& layer : cfg.layers) {
      f = hs_layer_forward(cloud, f, layer).output;
      fp = hs_layer_forward(permuted, fp, layer).output;
    }
    for (Index i = 0; i < cloud.size(); ++i) {
      c.max_deviation = std::max(c.max_deviation, (fp.row(i) - f.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff());
    }
    c.status = c.max_deviation <= kTol ? Status::pass : Status::fail;
    c.detail = "all layers, pooling skipped";
    report.checks.push_back(c);
  }
  return report;
}

std::string format_invariance_report(const InvarianceReport& report) {
  std::ostringstream out;
  for (const auto& c : report.checks) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-27s %-8s max_dev %-12.3e ", c.name.c_str(), std::string(status_name(c.status)).c_str(),
                  c.max_deviation);
    out << buf << c.detail << '\n';
  }
  out << (report.passed() ? "all checks passed" : "some checks failed") << '\n';
  return out.str();
}

}  // namespace hspose
