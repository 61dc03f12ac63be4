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

#include "hspose/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hspose/encoder_config.hpp"
#include "hspose/harness.hpp"
#include "hspose/metrics.hpp"
#include "hspose/pointcloud.hpp"
#include "hspose/rng.hpp"
#include "hspose/serialize.hpp"
#include "hspose/training.hpp"

namespace hspose {
namespace {

namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  bool quiet = false;
};

struct TaskFlags {
  Index epochs = 30;
  double lr = 0.1;
  Index batch = 4;
  Index train_count = 200;
  Index test_count = 50;
  Index points = 256;
  double max_tilt = 60.0;
};

class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void add_globals(CLI::App& app, Globals& g) {
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--config", g.config, "Encoder config file");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_flag("--quiet", g.quiet, "No summary line");
}

void add_task_flags(CLI::App& sub, TaskFlags& t) {
  sub.add_option("--epochs", t.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--lr", t.lr, "SGD learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--batch", t.batch, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--train-count", t.train_count, "Training samples")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--test-count", t.test_count, "Held-out samples")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--points", t.points, "Points per sample")->capture_default_str()->check(CLI::Range(8, 1 << 20));
  sub.add_option("--max-tilt", t.max_tilt, "Largest tilt of the up axis, degrees")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 180.0));
}

ToyTask task_from(const TaskFlags& t) {
  ToyTask task = default_toy_task();
  task.train_count = t.train_count;
  task.test_count = t.test_count;
  task.points = t.points;
  task.max_tilt_deg = t.max_tilt;
  return task;
}

TrainOptions train_options_from(const TaskFlags& t) {
  TrainOptions o;
  o.epochs = t.epochs;
  o.lr = t.lr;
  o.batch_size = t.batch;
  return o;
}

EncoderSpec encoder_spec(const Globals& g) {
  return g.config.empty() ? default_encoder_spec() : load_encoder_spec(g.config);
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw std::invalid_argument("--out is required");
  return g.out;
}

fs::path out_dir(const Globals& g) {
  const fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

/// Report text goes to --out when given, else to stdout.
void emit_report(const Globals& g, std::ostream& out, const std::string& text) {
  if (!g.out.empty()) {
    write_text(g.out, text);
  } else if (!g.quiet) {
    out << text;
  }
}

std::array<double, 3> default_dims(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::sphere: return {0.1, 0.0, 0.0};
    case ShapeKind::box: return {0.1, 0.15, 0.2};
    case ShapeKind::cylinder: return {0.05, 0.15, 0.0};
    case ShapeKind::mug: return {0.04, 0.1, 0.03};
    case ShapeKind::laptop: return {0.3, 0.22, 1.9};
  }
  return {1.0, 1.0, 1.0};
}

int cmd_gen(const Globals& g, const std::string& shape, Index n, const std::vector<double>& dims, std::ostream& out) {
  const auto path = require_out(g);
  ShapeSpec spec;
  spec.kind = parse_shape_kind(shape);
  spec.dimensions = default_dims(spec.kind);
  if (dims.size() > 3) throw std::invalid_argument("--dims takes at most 3 values");
  for (std::size_t i = 0; i < dims.size(); ++i) spec.dimensions[i] = dims[i];
  spec.seed = g.seed;
  const auto cloud = generate_shape(spec, n);
  save_pointcloud(cloud, path, format_from_path(path));
  if (!g.quiet) out << "gen: " << cloud.size() << " points of " << shape << " -> " << path.string() << '\n';
  return kExitOk;
}

Model model_for(const Globals& g, const std::string& weights) {
  Model model = init_model(encoder_spec(g), trial_seeds(g.seed, 0));
  if (!weights.empty()) assign(model, from_tensors(load_tensors(weights)));
  return model;
}

int cmd_encode(const Globals& g, const std::string& input, const std::string& weights, std::ostream& out) {
  const auto path = require_out(g);
  const auto cloud = load_pointcloud(input, format_from_path(input));
  const Model model = model_for(g, weights);
  const auto fwd = hs_encoder_forward(cloud, model.encoder);
  std::vector<NamedTensor> tensors{{"points", RowMatrix(fwd.cloud().points())}, {"features", fwd.features}};
  save_tensors(path, tensors, TensorFormat::text);
  if (!g.quiet) {
    out << "encode: " << fwd.features.rows() << " x " << fwd.features.cols() << " features -> " << path.string() << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(const Globals& g, double tol, double step, Index samples, Index points, std::ostream& out) {
  const Model model = model_for(g, "");
  Rng rng(mix_seed(g.seed, 0x9cULL));
  Points3 pts(points, 3);
  for (Index i = 0; i < points; ++i)
    for (int k = 0; k < 3; ++k) pts(i, k) = rng.uniform(-0.5, 0.5);
  const Vec3 label = rng.unit_vector();
  GradcheckOptions opts;
  opts.tol = tol;
  opts.step = step;
  opts.samples_per_group = samples;
  opts.seed = mix_seed(g.seed, 0x9dULL);

  GradcheckReport report;
  try {
    report = gradcheck_model(model, PointCloud(std::move(pts)), label, opts);
  } catch (const TieProximityError& e) {
    throw CheckFailed(e.what());
  }
  std::ostringstream text;
  text << "group              checked  max_rel_err\n";
  for (const auto& grp : report.groups) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-18s %-8lld %.3e\n", grp.name.c_str(), static_cast<long long>(grp.checked),
                  grp.max_rel_err);
    text << buf;
  }
  for (const auto& f : report.failing) {
    text << "FAIL " << f.group << " coord " << f.coord << " analytic " << format_real(f.analytic) << " numeric "
         << format_real(f.numeric) << '\n';
  }
  text << "tie rejections " << report.tie_rejections << '\n';
  emit_report(g, out, text.str());
  if (!g.quiet) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "gradcheck: %s, %lld coordinates, max relative error %.3e (tol %.1e)\n",
                  report.passed ? "pass" : "FAIL", static_cast<long long>(report.checked), report.max_rel_err, tol);
    out << buf;
  }
  return report.passed ? kExitOk : kExitCheckFailed;
}

int cmd_train(const Globals& g, const TaskFlags& t, std::ostream& out) {
  const auto dir = out_dir(g);
  const auto seeds = trial_seeds(g.seed, 0);
  ToyTask task = task_from(t);
  task.train_seed = seeds.train_data;
  task.test_seed = seeds.test_data;
  TrainOptions opts = train_options_from(t);
  opts.seed = seeds.shuffle;
  const auto result = train_on_samples(make_samples(task, true), make_samples(task, false),
                                       init_model(encoder_spec(g), seeds), opts);

  std::string log = "# epoch train_loss test_median_error_deg\n";
  for (const auto& e : result.curve) {
    log += std::to_string(e.epoch) + ' ';
    append_real(log, e.train_loss);
    log += ' ';
    append_real(log, e.test_median_error_deg);
    log += '\n';
  }
  const std::string stem = "train_" + std::to_string(g.seed);
  write_text(dir / (stem + ".log"), log);
  save_tensors(dir / (stem + "_checkpoint.txt"), to_tensors(flatten(result.model)), TensorFormat::text);
  if (!g.quiet) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "train: %lld epochs, median test error %.3f deg -> %s\n",
                  static_cast<long long>(t.epochs), result.test_median_error_deg, (dir / stem).string().c_str());
    out << buf;
  }
  return kExitOk;
}

int cmd_noise_sweep(const Globals& g, const TaskFlags& t, const std::vector<double>& ratios, Index trials,
                    std::ostream& out) {
  const auto dir = out_dir(g);
  SweepSpec spec;
  spec.variable = SweepVariable::outlier_ratio;
  spec.values = ratios;
  spec.trials = trials;
  spec.base = encoder_spec(g);
  spec.task = task_from(t);
  spec.train = train_options_from(t);
  spec.seed = g.seed;
  const auto result = run_noise_sweep(spec);
  const std::string stem = "noise_sweep_" + std::to_string(g.seed);
  write_text(dir / (stem + ".csv"), noise_sweep_csv(result));
  write_text(dir / (stem + ".txt"), noise_sweep_summary(result));
  if (!g.quiet) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "noise-sweep: error increase hs %.3f vs plain_gc %.3f deg -> %s.csv\n",
                  result.hs_increase, result.gc_increase, (dir / stem).string().c_str());
    out << buf;
  }
  return kExitOk;
}

int cmd_neighbor_sweep(const Globals& g, const TaskFlags& t, const std::string& variable,
                       const std::vector<double>& values, Index trials, bool timing, std::ostream& out) {
  const auto dir = out_dir(g);
  SweepSpec spec;
  spec.variable = parse_sweep_variable(variable);
  spec.values = values;
  spec.trials = trials;
  spec.base = encoder_spec(g);
  spec.task = task_from(t);
  spec.train = train_options_from(t);
  spec.seed = g.seed;
  spec.timing = timing;
  const auto result = run_neighbor_sweep(spec);
  const std::string stem = "neighbor_sweep_" + std::to_string(g.seed);
  write_text(dir / (stem + ".csv"), neighbor_sweep_csv(result));
  write_text(dir / (stem + ".txt"), neighbor_sweep_summary(result));
  if (!g.quiet) out << "neighbor-sweep: " << result.rows.size() << " rows -> " << (dir / stem).string() << ".csv\n";
  return kExitOk;
}

int cmd_invariance(const Globals& g, const InvarianceOptions& opts, std::ostream& out) {
  const Model model = model_for(g, "");
  const auto report = run_invariance_suite(model.encoder, g.seed, opts);
  emit_report(g, out, format_invariance_report(report));
  if (!g.quiet) {
    const auto failed = std::count_if(report.checks.begin(), report.checks.end(),
                                      [](const CheckResult& c) { return c.status == CheckResult::Status::fail; });
    out << "invariance: " << report.checks.size() << " checks, " << failed << " failed\n";
  }
  return report.passed() ? kExitOk : kExitCheckFailed;
}

int cmd_eval(const Globals& g, const std::string& records_path, Index samples, std::ostream& out) {
  const auto records = load_records(records_path);
  const auto report = evaluate(records, samples, g.seed);
  emit_report(g, out, format_report(report));
  if (!g.quiet) {
    out << "eval: " << records.size() << " records, " << report.categories.size() << " categories\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid-scope point cloud encoder: data generation, training, checks and pose metrics", "hspose"};
  app.require_subcommand(1);
  Globals g;
  add_globals(app, g);

  auto* gen = app.add_subcommand("gen", "Sample a synthetic shape into a PLY/XYZ file");
  add_globals(*gen, g);
  std::string shape;
  Index gen_n = 1024;
  std::vector<double> dims;
  gen->add_option("--shape", shape, "sphere | box | cylinder | mug | laptop")->required();
  gen->add_option("--n", gen_n, "Number of points")->capture_default_str()->check(CLI::Range(8, 1 << 24));
  gen->add_option("--dims", dims, "Shape dimensions in meters (angle in radians)")->delimiter(',');

  auto* encode = app.add_subcommand("encode", "Run the encoder on a point cloud");
  add_globals(*encode, g);
  std::string input, weights;
  encode->add_option("--input", input, "Input PLY/XYZ file")->required()->check(CLI::ExistingFile);
  encode->add_option("--weights", weights, "Checkpoint written by train")->check(CLI::ExistingFile);

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  add_globals(*gradcheck, g);
  double tol = 1e-4, step = 1e-6;
  Index gc_samples = 50, gc_points = 24;
  gradcheck->add_option("--tol", tol, "Relative error tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", step, "Finite-difference step")->capture_default_str()->check(CLI::PositiveNumber);
  gradcheck->add_option("--samples", gc_samples, "Coordinates per parameter group")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--points", gc_points, "Points in the test cloud")->capture_default_str()->check(CLI::Range(2, 4096));

  TaskFlags task_flags;
  auto* train = app.add_subcommand("train", "Train on the synthetic up-axis task");
  add_globals(*train, g);
  add_task_flags(*train, task_flags);

  auto* noise = app.add_subcommand("noise-sweep", "Outlier-ratio sweep, HS vs plain-GC");
  add_globals(*noise, g);
  add_task_flags(*noise, task_flags);
  std::vector<double> ratios{0.0, 0.1, 0.2, 0.3, 0.4};
  Index noise_trials = 5;
  noise->add_option("--ratios", ratios, "Outlier ratios")->delimiter(',')->capture_default_str();
  noise->add_option("--trials", noise_trials, "Trials per ratio")->capture_default_str()->check(CLI::PositiveNumber);

  auto* neighbor = app.add_subcommand("neighbor-sweep", "Neighbor-count sweep");
  add_globals(*neighbor, g);
  add_task_flags(*neighbor, task_flags);
  std::string variable = "m_rff";
  std::vector<double> values{3, 5, 10, 20, 40};
  Index neighbor_trials = 1;
  bool timing = false;
  neighbor->add_option("--variable", variable, "m_rff | m_orl | m_both")
      ->capture_default_str()
      ->check(CLI::IsMember({"m_rff", "m_orl", "m_both"}));
  neighbor->add_option("--values", values, "Neighbor counts")->delimiter(',')->capture_default_str();
  neighbor->add_option("--trials", neighbor_trials, "Trials per value")->capture_default_str()->check(CLI::PositiveNumber);
  neighbor->add_flag("--timing", timing, "Add forward wall-clock (output no longer reproducible)");

  auto* invariance = app.add_subcommand("invariance", "Run the invariance suite");
  add_globals(*invariance, g);
  InvarianceOptions inv;
  invariance->add_option("--points", inv.points, "Points per cloud")->capture_default_str()->check(CLI::Range(16, 1 << 20));
  invariance->add_option("--transforms", inv.transforms, "Random transforms per check")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Pose metrics for a JSON-lines record file");
  add_globals(*eval, g);
  std::string records;
  Index iou_samples = 100000;
  eval->add_option("--records", records, "Record file")->required()->check(CLI::ExistingFile);
  eval->add_option("--samples", iou_samples, "Monte-Carlo IoU samples")->capture_default_str()->check(CLI::Range(10000, 1 << 30));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(g, shape, gen_n, dims, out);
    if (*encode) return cmd_encode(g, input, weights, out);
    if (*gradcheck) return cmd_gradcheck(g, tol, step, gc_samples, gc_points, out);
    if (*train) return cmd_train(g, task_flags, out);
    if (*noise) return cmd_noise_sweep(g, task_flags, ratios, noise_trials, out);
    if (*neighbor) return cmd_neighbor_sweep(g, task_flags, variable, values, neighbor_trials, timing, out);
    if (*invariance) return cmd_invariance(g, inv, out);
    if (*eval) return cmd_eval(g, records, iou_samples, out);
  } catch (const CheckFailed& e) {
    err << "hspose: check failed: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    err << "hspose: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace hspose
