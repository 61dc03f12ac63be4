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

#ifndef HSPOSE_TRAINING_HPP
#define HSPOSE_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hspose/common.hpp"
#include "hspose/hslayer.hpp"
#include "hspose/pointcloud.hpp"
#include "hspose/serialize.hpp"

namespace hspose {

struct TensorShape {
  std::string name;
  Index rows = 0;
  Index cols = 0;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// Every trainable scalar of a model in a fixed order, with the manifest
/// needed to put them back.
struct ParamVector {
  std::vector<double> values;
  std::vector<TensorShape> manifest;

  Index size() const { return static_cast<Index>(values.size()); }
};

/// HS-encoder followed by a linear head on the mean of the final features.
struct Model {
  EncoderConfig encoder;
  LinearMap head;  ///< D_out -> 3
};

/// Disabled ablation paths are skipped. Tensor order: per layer, per kernel
/// support_dirs / center_weights / support_weights, then ste, orl; head last.
ParamVector flatten(const Model& model);
/// Writes `params` into `model`; throws ShapeError if the manifest differs.
void assign(Model& model, const ParamVector& params);

/// Gradients packed with the same manifest as flatten(model).
ParamVector flatten_grad(const Model& model, const EncoderGrad& encoder_grad, const LinearMap& head_grad);

std::vector<NamedTensor> to_tensors(const ParamVector& params);
ParamVector from_tensors(const std::vector<NamedTensor>& tensors);

/// Parameter group of a manifest entry: "gc_support_dirs", "gc_weights",
/// "ste", "orl" or "head".
std::string param_group(const std::string& tensor_name);

/// Unit prediction of the up axis.
Vec3 predict(const Model& model, const PointCloud& cloud);

/// 1 - cos(prediction, label).
double model_loss(const Model& model, const PointCloud& cloud, const Vec3& label,
                  const EncoderTopology* frozen = nullptr);

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
  EncoderForward forward;
};

LossAndGrad model_loss_and_grad(const Model& model, const PointCloud& cloud, const Vec3& label);

/// Angle in degrees between two directions (arccos of the clamped cosine).
double angular_error_deg(const Vec3& prediction, const Vec3& label);

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TieProximityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every coordinate.
ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& f, const ParamVector& params,
                             double step);

/// Function value plus a signature of the discrete choices made while
/// computing it (see decision_signature).
struct Probe {
  double value = 0.0;
  std::uint64_t signature = 0;
};

struct CoordinateGroup {
  std::string name;
  std::vector<Index> coords;
};

struct GradcheckOptions {
  double tol = 1e-4;
  double step = 1e-6;
  Index samples_per_group = 50;
  std::uint64_t seed = 0;
};

struct GradcheckFailure {
  std::string group;
  Index coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GroupResult {
  std::string name;
  Index checked = 0;
  double max_rel_err = 0.0;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  Index checked = 0;
  Index tie_rejections = 0;
  std::vector<GroupResult> groups;
  std::vector<GradcheckFailure> failing;
  bool passed = false;
};

/// |a - n| / max(1e-8, |a|, |n|)
double relative_error(double analytic, double numeric);

/// Compares `analytic` with central differences of `f` on up to
/// samples_per_group coordinates per group. A coordinate whose perturbed
/// evaluations change the decision signature sits near a max/kNN tie and is
/// replaced by another from its group; five consecutive rejections throw
/// TieProximityError.
GradcheckReport gradcheck(const std::function<Probe(const std::vector<double>&)>& f, const std::vector<double>& params,
                          const std::vector<double>& analytic, const std::vector<CoordinateGroup>& groups,
                          const GradcheckOptions& options);

/// Gradcheck of the full model (encoder + head, cosine loss) with the
/// receptive fields frozen at their values for `cloud`.
GradcheckReport gradcheck_model(const Model& model, const PointCloud& cloud, const Vec3& label,
                                const GradcheckOptions& options);

/// p - lr * g; manifests must match.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grads, double lr);

/// Synthetic up-axis regression task. Each sample is one shape template with
/// jittered dimensions, a random yaw about its own z axis, a tilt of the z
/// axis drawn uniformly from the spherical cap of half-angle max_tilt_deg,
/// then centred at its mean. The label is the rotated z axis.
struct ToyTask {
  std::vector<ShapeSpec> shapes;
  Index train_count = 200;
  Index test_count = 50;
  Index points = 256;
  double max_tilt_deg = 60.0;
  double size_jitter = 0.2;
  std::uint64_t train_seed = 1;
  std::uint64_t test_seed = 2;
};

/// Boxes (0.3 x 0.4 x 0.8) and cylinders (r 0.2, h 0.8).
ToyTask default_toy_task();

struct Sample {
  PointCloud cloud;
  Vec3 label;
  std::uint64_t seed = 0;
};

Sample make_sample(const ToyTask& task, std::uint64_t sample_seed);
std::vector<Sample> make_samples(const ToyTask& task, bool train);

struct TrainOptions {
  Index epochs = 30;
  double lr = 0.1;
  Index batch_size = 4;
  std::uint64_t seed = 0;  ///< shuffling order
};

struct EpochStats {
  Index epoch = 0;
  double train_loss = 0.0;  ///< mean loss over the epoch's updates
  double test_median_error_deg = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> curve;
  std::vector<double> test_errors_deg;
  double test_median_error_deg = 0.0;
};

double median(std::vector<double> values);

/// Median angular error of `model` over `samples`; per-sample errors go to
/// `errors` when given.
double evaluate_median_error(const Model& model, const std::vector<Sample>& samples,
                             std::vector<double>* errors = nullptr);

/// Minibatch SGD on the cosine loss. Deterministic for fixed inputs.
TrainResult train_toy_rotation(const ToyTask& task, const EncoderConfig& cfg, const LinearMap& head,
                               const TrainOptions& options);

/// Same, with pre-built sample sets.
TrainResult train_on_samples(const std::vector<Sample>& train, const std::vector<Sample>& test, const Model& init,
                             const TrainOptions& options);

}  // namespace hspose

#endif  // HSPOSE_TRAINING_HPP
