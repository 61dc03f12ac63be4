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

#ifndef HSPOSE_HARNESS_HPP
#define HSPOSE_HARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hspose/encoder_config.hpp"
#include "hspose/training.hpp"

namespace hspose {

enum class SweepVariable { outlier_ratio, m_rff, m_orl, m_both };

SweepVariable parse_sweep_variable(std::string_view name);
std::string_view sweep_variable_name(SweepVariable v);

struct SweepSpec {
  SweepVariable variable = SweepVariable::outlier_ratio;
  std::vector<double> values;
  Index trials = 5;
  EncoderSpec base = default_encoder_spec();
  ToyTask task = default_toy_task();
  TrainOptions train;
  std::uint64_t seed = 0;
  /// Neighbor sweep only: measure forward wall-clock. Off by default so the
  /// CSV stays byte-reproducible.
  bool timing = false;

  /// values non-empty and strictly increasing, trials >= 1, and the values
  /// legal for the variable.
  void validate() const;
};

/// Everything a trial derives from its seed.
struct TrialSeeds {
  std::uint64_t trial = 0;
  std::uint64_t train_data = 0;
  std::uint64_t test_data = 0;
  std::uint64_t params = 0;
  std::uint64_t shuffle = 0;
};
TrialSeeds trial_seeds(std::uint64_t sweep_seed, Index trial);

/// Encoder and head initialised from `seeds.params`.
Model init_model(const EncoderSpec& spec, const TrialSeeds& seeds);

/// Stand-in scene background for a centred object cloud: half the points on
/// a support plane just below the object, half uniform clutter in its
/// bounding box grown by 30 cm.
PointCloud make_background(const PointCloud& object, Index count, std::uint64_t seed);

/// Replaces `ratio` of the points with background points and re-centres.
/// Ratio 0 returns the input unchanged.
PointCloud perturb_cloud(const PointCloud& cloud, double ratio, std::uint64_t seed);

/// FNV-1a over the coordinate bytes.
std::uint64_t cloud_hash(const PointCloud& cloud);
std::uint64_t samples_hash(const std::vector<Sample>& samples);

struct NoiseRow {
  Index trial = 0;
  std::uint64_t trial_seed = 0;
  double ratio = 0.0;
  std::uint64_t noise_seed = 0;
  double hs_error_deg = 0.0;
  double gc_error_deg = 0.0;
  std::uint64_t input_hash = 0;
};

struct NoiseSweepResult {
  std::vector<NoiseRow> rows;       ///< trial-major, ratios in order
  std::vector<double> ratios;
  std::vector<double> hs_median;    ///< per ratio, over trials
  std::vector<double> gc_median;
  /// Median over trials of error(last ratio) - error(first ratio).
  double hs_increase = 0.0;
  double gc_increase = 0.0;

  bool hs_steadier() const { return hs_increase < gc_increase; }
};

/// Trains the full HS model and its plain-GC ablation on clean data for each
/// trial, then evaluates both on the same perturbed test sets.
NoiseSweepResult run_noise_sweep(const SweepSpec& spec);
std::string noise_sweep_csv(const NoiseSweepResult& result);
std::string noise_sweep_summary(const NoiseSweepResult& result);

struct NeighborRow {
  double value = 0.0;
  Index trial = 0;
  std::uint64_t trial_seed = 0;
  double error_deg = 0.0;
  std::optional<double> forward_ms;
};

struct NeighborSweepResult {
  SweepVariable variable = SweepVariable::m_rff;
  std::vector<NeighborRow> rows;  ///< one per (value, trial)
};

/// Applies the swept neighbor count to every layer of `cfg`.
void set_neighbor_count(EncoderSpec& spec, SweepVariable variable, Index m);

/// Median forward wall-clock in milliseconds over `runs` after `warmups`.
double time_forward_ms(const EncoderConfig& cfg, const PointCloud& cloud, int runs = 50, int warmups = 5);

NeighborSweepResult run_neighbor_sweep(const SweepSpec& spec);
std::string neighbor_sweep_csv(const NeighborSweepResult& result);
std::string neighbor_sweep_summary(const NeighborSweepResult& result);

struct CheckResult {
  enum class Status { pass, fail, skipped };
  std::string name;
  Status status = Status::pass;
  double max_deviation = 0.0;
  std::string detail;
};

std::string_view status_name(CheckResult::Status s);

struct InvarianceOptions {
  Index points = 256;
  Index transforms = 100;
  Index clouds = 10;
};

struct InvarianceReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  const CheckResult& at(std::string_view name) const;
};

/// Checks on randomized instances:
///   gc_translation_invariance  first-layer geometric path vs translations, |t| <= 10
///   gc_scale_invariance        same under uniform scaling in [0.01, 100]
///   ste_breaks_invariance      first-layer output moves under translation by (1, 0, 0);
///                              skipped when the first STE map has zero weights
///   first_layer_rf_p           first-layer neighbor sets equal brute-force RF-P
///   orl_residual_identity      zero ORL parameters give out = in bit-exactly
///   permutation_equivariance   permuting the input permutes the output rows
InvarianceReport run_invariance_suite(const EncoderConfig& cfg, std::uint64_t seed,
                                      const InvarianceOptions& options = {});
std::string format_invariance_report(const InvarianceReport& report);

}  // namespace hspose

#endif  // HSPOSE_HARNESS_HPP
