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

#include "hspose/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hspose/rng.hpp"

namespace hspose {
namespace {

template <typename ModelT, typename F>
void visit_tensors(ModelT& model, F&& f) {
  for (std::size_t l = 0; l < model.encoder.layers.size(); ++l) {
    auto& layer = model.encoder.layers[l];
    const std::string prefix = "layer" + std::to_string(l);
    for (std::size_t c = 0; c < layer.gc.kernels.size(); ++c) {
      auto& k = layer.gc.kernels[c];
      const std::string kp = prefix + ".gc.k" + std::to_string(c);
      f(kp + ".support_dirs", k.support_dirs.data(), k.support_dirs.rows(), k.support_dirs.cols());
      f(kp + ".center_weights", k.center_weights.data(), Index{1}, k.center_weights.size());
      f(kp + ".support_weights", k.support_weights.data(), k.support_weights.rows(), k.support_weights.cols());
    }
    if (layer.use_ste) {
      f(prefix + ".ste.weights", layer.ste.weights.data(), layer.ste.weights.rows(), layer.ste.weights.cols());
      f(prefix + ".ste.bias", layer.ste.bias.data(), Index{1}, layer.ste.bias.size());
    }
    if (layer.use_orl) {
      f(prefix + ".orl.weights", layer.orl.weights.data(), layer.orl.weights.rows(), layer.orl.weights.cols());
      f(prefix + ".orl.bias", layer.orl.bias.data(), Index{1}, layer.orl.bias.size());
    }
  }
  f(std::string("head.weights"), model.head.weights.data(), model.head.weights.rows(), model.head.weights.cols());
  f(std::string("head.bias"), model.head.bias.data(), Index{1}, model.head.bias.size());
}

struct ForwardLoss {
  double loss = 0.0;
  EncoderForward forward;
  Eigen::RowVectorXd pooled;
  Eigen::RowVector3d y;
};

ForwardLoss forward_loss(const Model& model, const PointCloud& cloud, const Vec3& label, const EncoderTopology* frozen) {
  ForwardLoss out;
  out.forward = hs_encoder_forward(cloud, model.encoder, frozen);
  out.pooled = out.forward.features.colwise().mean();
  out.y = out.pooled * model.head.weights + model.head.bias;
  const double norm = out.y.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NonFiniteError("model output has zero or non-finite norm");
  out.loss = 1.0 - out.y.dot(label.transpose()) / norm;
  if (!std::isfinite(out.loss)) throw NonFiniteError("non-finite loss");
  return out;
}

}  // namespace

ParamVector flatten(const Model& model) {
  ParamVector pv;
  visit_tensors(model, [&](const std::string& name, const double* data, Index rows, Index cols) {
    pv.manifest.push_back({name, rows, cols});
    pv.values.insert(pv.values.end(), data, data + rows * cols);
  });
  return pv;
}

void assign(Model& model, const ParamVector& params) {
  std::size_t cursor = 0;
  std::size_t tensor = 0;
  visit_tensors(model, [&](const std::string& name, double* data, Index rows, Index cols) {
    if (tensor >= params.manifest.size() || params.manifest[tensor] != TensorShape{name, rows, cols}) {
      throw ShapeError("assign: manifest mismatch at tensor '" + name + "'");
    }
    ++tensor;
    const auto count = static_cast<std::size_t>(rows * cols);
    if (cursor + count > params.values.size()) throw ShapeError("assign: parameter vector too short");
    std::copy_n(params.values.begin() + static_cast<std::ptrdiff_t>(cursor), count, data);
    cursor += count;
  });
  if (tensor != params.manifest.size() || cursor != params.values.size()) {
    throw ShapeError("assign: parameter vector has extra entries");
  }
}

ParamVector flatten_grad(const Model& model, const EncoderGrad& encoder_grad, const LinearMap& head_grad) {
  if (encoder_grad.layers.size() != model.encoder.layers.size()) throw ShapeError("flatten_grad: layer count");
  Model g = model;
  for (std::size_t l = 0; l < g.encoder.layers.size(); ++l) {
    g.encoder.layers[l].gc = encoder_grad.layers[l].gc;
    g.encoder.layers[l].ste = encoder_grad.layers[l].ste;
    g.encoder.layers[l].orl = encoder_grad.layers[l].orl;
  }
  g.head = head_grad;
  auto pv = flatten(g);
  if (pv.manifest != flatten(model).manifest) throw ShapeError("flatten_grad: gradient shapes differ from model");
  return pv;
}

std::vector<NamedTensor> to_tensors(const ParamVector& params) {
  std::vector<NamedTensor> out;
  std::size_t cursor = 0;
  for (const auto& shape : params.manifest) {
    RowMatrix value(shape.rows, shape.cols);
    std::copy_n(params.values.begin() + static_cast<std::ptrdiff_t>(cursor), value.size(), value.data());
    cursor += static_cast<std::size_t>(value.size());
    out.push_back({shape.name, std::move(value)});
  }
  return out;
}

ParamVector from_tensors(const std::vector<NamedTensor>& tensors) {
  ParamVector pv;
  for (const auto& t : tensors) {
    pv.manifest.push_back({t.name, t.value.rows(), t.value.cols()});
    pv.values.insert(pv.values.end(), t.value.data(), t.value.data() + t.value.size());
  }
  return pv;
}

std::string param_group(const std::string& name) {
  if (name.starts_with("head.")) return "head";
  if (name.ends_with(".support_dirs")) return "gc_support_dirs";
  if (name.find(".gc.") != std::string::npos) return "gc_weights";
  if (name.find(".ste.") != std::string::npos) return "ste";
  if (name.find(".orl.") != std::string::npos) return "orl";
  return "other";
}

Vec3 predict(const Model& model, const PointCloud& cloud) {
  const auto fwd = hs_encoder_forward(cloud, model.encoder);
  const Eigen::RowVectorXd pooled = fwd.features.colwise().mean();
  const Eigen::RowVector3d y = pooled * model.head.weights + model.head.bias;
  const double norm = y.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NonFiniteError("model output has zero or non-finite norm");
  return (y / norm).transpose();
}

double model_loss(const Model& model, const PointCloud& cloud, const Vec3& label, const EncoderTopology* frozen) {
  return forward_loss(model, cloud, label, frozen).loss;
}

LossAndGrad model_loss_and_grad(const Model& model, const PointCloud& cloud, const Vec3& label) {
  auto fl = forward_loss(model, cloud, label, nullptr);
  const double norm = fl.y.norm();
  const Eigen::RowVector3d p = fl.y / norm;
  const Eigen::RowVector3d l = label.transpose();
  const double cosine = p.dot(l);
  const Eigen::RowVector3d dy = -(l - cosine * p) / norm;

  LinearMap head_grad;
  head_grad.weights = fl.pooled.transpose() * dy;
  head_grad.bias = dy;
  const Eigen::RowVectorXd dz = dy * model.head.weights.transpose();
  const Index rows = fl.forward.features.rows();
  FeatureMap d_features = Eigen::VectorXd::Ones(rows) * (dz / static_cast<double>(rows));

  const auto enc_grad = hs_encoder_backward(model.encoder, fl.forward, d_features);
  return {fl.loss, flatten_grad(model, enc_grad, head_grad), std::move(fl.forward)};
}

double angular_error_deg(const Vec3& prediction, const Vec3& label) {
  const double c = std::clamp(prediction.normalized().dot(label.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& f, const ParamVector& params,
                             double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  ParamVector grad{std::vector<double>(params.values.size()), params.manifest};
  ParamVector probe = params;
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    probe.values[i] = params.values[i] + step;
    const double up = f(probe);
    probe.values[i] = params.values[i] - step;
    const double down = f(probe);
    probe.values[i] = params.values[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteError("finite_diff_grad: non-finite evaluation at coordinate " + std::to_string(i));
    }
    grad.values[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1e-8, std::abs(analytic), std::abs(numeric)});
}

GradcheckReport gradcheck(const std::function<Probe(const std::vector<double>&)>& f, const std::vector<double>& params,
                          const std::vector<double>& analytic, const std::vector<CoordinateGroup>& groups,
                          const GradcheckOptions& options) {
  if (analytic.size() != params.size()) throw ShapeError("gradcheck: gradient size != parameter count");
  constexpr int kMaxResamples = 5;
  const Probe base = f(params);
  Rng rng(options.seed);
  GradcheckReport report;
  std::vector<double> probe = params;

  for (const auto& group : groups) {
    GroupResult result{group.name, 0, 0.0};
    const auto order = sample_without_replacement(static_cast<Index>(group.coords.size()),
                                                  static_cast<Index>(group.coords.size()), rng);
    const Index want = std::min<Index>(options.samples_per_group, static_cast<Index>(group.coords.size()));
    int rejections = 0;
    for (std::size_t k = 0; k < order.size() && result.checked < want; ++k) {
      const auto i = static_cast<std::size_t>(group.coords[static_cast<std::size_t>(order[k])]);
      probe[i] = params[i] + options.step;
      const Probe up = f(probe);
      probe[i] = params[i] - options.step;
      const Probe down = f(probe);
      probe[i] = params[i];
      if (!std::isfinite(up.value) || !std::isfinite(down.value)) {
        throw NonFiniteError("gradcheck: non-finite evaluation at coordinate " + std::to_string(i));
      }
      if (up.signature != base.signature || down.signature != base.signature) {
        ++report.tie_rejections;
        if (++rejections > kMaxResamples) {
          throw TieProximityError("gradcheck: group '" + group.name + "' stays within a max/kNN tie after " +
                                  std::to_string(kMaxResamples) + " resamples");
        }
        continue;
      }
      rejections = 0;
      const double numeric = (up.value - down.value) / (2.0 * options.step);
      const double rel = relative_error(analytic[i], numeric);
      ++result.checked;
      result.max_rel_err = std::max(result.max_rel_err, rel);
      if (rel > options.tol) report.failing.push_back({group.name, static_cast<Index>(i), analytic[i], numeric, rel});
    }
    report.checked += result.checked;
    report.max_rel_err = std::max(report.max_rel_err, result.max_rel_err);
    report.groups.push_back(result);
  }
  report.passed = report.failing.empty() && report.checked > 0;
  return report;
}

GradcheckReport gradcheck_model(const Model& model, const PointCloud& cloud, const Vec3& label,
                                const GradcheckOptions& options) {
  const auto base = model_loss_and_grad(model, cloud, label);
  const auto topology = topology_of(base.forward);
  const auto params = flatten(model);

  std::vector<CoordinateGroup> groups;
  Index cursor = 0;
  for (const auto& shape : params.manifest) {
    const auto name = param_group(shape.name);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const CoordinateGroup& g) { return g.name == name; });
    if (it == groups.end()) {
      groups.push_back({name, {}});
      it = std::prev(groups.end());
    }
    for (Index i = 0; i < shape.rows * shape.cols; ++i) it->coords.push_back(cursor + i);
    cursor += shape.rows * shape.cols;
  }

  Model scratch = model;
  auto f = [&](const std::vector<double>& values) {
    assign(scratch, ParamVector{values, params.manifest});
    const auto fl = forward_loss(scratch, cloud, label, &topology);
    return Probe{fl.loss, decision_signature(fl.forward)};
  };
  return gradcheck(f, params.values, base.grad.values, groups, options);
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grads, double lr) {
  if (params.manifest != grads.manifest || params.values.size() != grads.values.size()) {
    throw ShapeError("sgd_step: parameter and gradient manifests differ");
  }
  ParamVector out = params;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= lr * grads.values[i];
  return out;
}

ToyTask default_toy_task() {
  ToyTask task;
  task.shapes = {ShapeSpec{ShapeKind::box, {0.3, 0.4, 0.8}, 0}, ShapeSpec{ShapeKind::cylinder, {0.2, 0.8, 0.0}, 0}};
  return task;
}

Sample make_sample(const ToyTask& task, std::uint64_t sample_seed) {
  if (task.shapes.empty()) throw std::invalid_argument("ToyTask: no shapes");
  Rng rng(sample_seed);
  ShapeSpec spec = task.shapes[static_cast<std::size_t>(rng.below(task.shapes.size()))];
  const std::size_t jittered = spec.kind == ShapeKind::laptop ? 2 : 3;
  for (std::size_t i = 0; i < jittered; ++i) {
    spec.dimensions[i] *= rng.uniform(1.0 - task.size_jitter, 1.0 + task.size_jitter);
  }
  spec.seed = rng.next();
  const auto shape = generate_shape(spec, task.points);

  constexpr double pi = std::numbers::pi;
  const double yaw = rng.uniform(0.0, 2.0 * pi);
  const double cos_max = std::cos(task.max_tilt_deg * pi / 180.0);
  const double tilt = std::acos(std::clamp(1.0 - rng.uniform() * (1.0 - cos_max), -1.0, 1.0));
  const double azimuth = rng.uniform(0.0, 2.0 * pi);
  Pose pose;
  pose.rotation = axis_angle(Vec3(std::cos(azimuth), std::sin(azimuth), 0.0), tilt) * axis_angle(Vec3::UnitZ(), yaw);
  pose.translation = Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));

  auto [centred, mean] = center_to_mean(apply_pose(shape, pose));
  return Sample{std::move(centred), pose.rotation.col(2), sample_seed};
}

std::vector<Sample> make_samples(const ToyTask& task, bool train) {
  const Index count = train ? task.train_count : task.test_count;
  const std::uint64_t seed = train ? task.train_seed : task.test_seed;
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) samples.push_back(make_sample(task, mix_seed(seed, static_cast<std::uint64_t>(i))));
  return samples;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double evaluate_median_error(const Model& model, const std::vector<Sample>& samples, std::vector<double>* errors) {
  std::vector<double> errs;
  errs.reserve(samples.size());
  for (const auto& s : samples) errs.push_back(angular_error_deg(predict(model, s.cloud), s.label));
  const double med = median(errs);
  if (errors != nullptr) *errors = std::move(errs);
  return med;
}

TrainResult train_on_samples(const std::vector<Sample>& train, const std::vector<Sample>& test, const Model& init,
                             const TrainOptions& options) {
  if (train.empty()) throw std::invalid_argument("train_on_samples: empty training set");
  if (options.batch_size < 1) throw std::invalid_argument("train_on_samples: batch_size must be >= 1");
  TrainResult result{init, {}, {}, 0.0};
  Model& model = result.model;
  ParamVector params = flatten(model);

  std::vector<Index> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);

  for (Index epoch = 0; epoch < options.epochs; ++epoch) {
    Rng rng(mix_seed(options.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      ParamVector grad{std::vector<double>(params.values.size(), 0.0), params.manifest};
      for (std::size_t b = start; b < end; ++b) {
        const auto& sample = train[static_cast<std::size_t>(order[b])];
        LossAndGrad lg;
        try {
          lg = model_loss_and_grad(model, sample.cloud, sample.label);
        } catch (const NonFiniteError& e) {
          throw NonFiniteError(std::string(e.what()) + " (sample seed " + std::to_string(sample.seed) + ")");
        }
        loss_sum += lg.loss;
        for (std::size_t i = 0; i < grad.values.size(); ++i) grad.values[i] += lg.grad.values[i];
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& g : grad.values) g *= scale;
      assign(model, sgd_step(params, grad, options.lr));
      for (auto& layer : model.encoder.layers) layer.gc.enforce_support_norms();
      params = flatten(model);
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / static_cast<double>(train.size());
    stats.test_median_error_deg = test.empty() ? 0.0 : evaluate_median_error(model, test);
    result.curve.push_back(stats);
  }
  if (!test.empty()) result.test_median_error_deg = evaluate_median_error(model, test, &result.test_errors_deg);
  return result;
}

TrainResult train_toy_rotation(const ToyTask& task, const EncoderConfig& cfg, const LinearMap& head,
                               const TrainOptions& options) {
  cfg.validate();
  if (head.d_in() != cfg.d_out() || head.d_out() != 3) throw ShapeError("train_toy_rotation: head must map D_out -> 3");
  return train_on_samples(make_samples(task, true), make_samples(task, false), Model{cfg, head}, options);
}

}  // namespace hspose
