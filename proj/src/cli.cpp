#include "eitnet/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "eitnet/complexity.hpp"
#include "eitnet/csv.hpp"
#include "eitnet/experiment.hpp"
#include "eitnet/gradcheck.hpp"
#include "eitnet/rng.hpp"
#include "eitnet/stream.hpp"

namespace eitnet {

namespace fs = std::filesystem;

namespace {

/// Bad user configuration; maps to exit code 3.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs a configuration step, reporting std::invalid_argument as ConfigError.
template <typename F>
auto checked(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

struct Options {
  std::uint64_t seed = 7;
  std::string out;
  std::string dataset;
  std::string axis = "subject";
  std::string toggles = "det,i3d,tsf";
  double lr = 0.001;
  std::size_t epochs = 50;
  double lambda = kDefaultLambda;
  double threshold = 0.5;
  std::int64_t window_period_us = 0;
  std::string cameras = "5";
  std::string duration = "2s";
  bool threaded = false;
};

fs::path output_dir(const Options& o) {
  fs::path dir = o.out;
  if (dir.empty()) {
    const char* env = std::getenv("EITNET_OUT");
    dir = env && *env ? env : "eitnet_out";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::vector<SyntheticAction> dataset_for(const Options& o) {
  if (o.dataset.empty()) return generate_synthetic_dataset({}, o.seed);
  if (!fs::is_directory(o.dataset)) throw ConfigError("dataset directory not found: " + o.dataset);
  return load_dataset(o.dataset, {});
}

TrainConfig train_config(const Options& o) {
  TrainConfig t;
  t.base_lr = o.lr;
  t.max_epochs = o.epochs;
  t.lambda = o.lambda;
  t.seed = o.seed;
  checked([&] { t.validate(); });
  return t;
}

StageToggles toggles_of(const Options& o) {
  return checked([&] { return StageToggles::parse(o.toggles); });
}

SplitAxis axis_of(const Options& o) {
  return checked([&] { return parse_split_axis(o.axis); });
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  const fs::path dir = o.dataset.empty() ? output_dir(o) / "dataset" : fs::path(o.dataset);
  const auto samples = generate_synthetic_dataset({}, o.seed);
  save_dataset(dir.string(), samples, o.seed);
  out << "gen-data: " << samples.size() << " samples -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto toggles = toggles_of(o);
  const auto train = train_config(o);
  const auto axis = axis_of(o);
  const fs::path dir = output_dir(o);
  const auto split = split_samples(dataset_for(o), axis, o.seed);
  const TrainResult r = train_toy({}, toggles, split.train, train);
  {
    auto os = open_output(dir / "learning_curves.csv");
    write_learning_curves(os, r, o.seed);
  }
  auto os = open_output(dir / "train_summary.csv");
  CsvWriter csv(os, o.seed, {"metric", "value"}, "configuration=" + toggles.label());
  const auto u = [](std::size_t v) { return format_number(std::uint64_t{v}); };
  csv.row({"split_axis", to_string(axis)});
  csv.row({"train_samples", u(r.train_samples)});
  csv.row({"val_samples", u(r.val_samples)});
  csv.row({"epochs_run", u(r.history.size())});
  csv.row({"best_epoch", u(r.best_epoch)});
  csv.row({"stopped_early", r.stopped_early ? "true" : "false"});
  csv.row({"initial_train_loss", format_number(r.initial_train_loss)});
  csv.row({"initial_val_loss", format_number(r.initial_val_loss)});
  const auto& best = r.history.at(r.best_epoch - 1);
  csv.row({"best_val_loss", format_number(best.val_loss)});
  csv.row({"best_val_acc", format_number(best.val_acc)});
  out << "train: " << r.history.size() << " epochs, best epoch " << r.best_epoch
      << ", val loss " << format_number(best.val_loss) << " -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto toggles = toggles_of(o);
  const auto train = train_config(o);
  const auto axis = axis_of(o);
  const fs::path dir = output_dir(o);
  const SplitReport r = run_split(dataset_for(o), axis, toggles, {}, train);
  auto os = open_output(dir / "metrics.csv");
  const SplitReport rows[] = {r};
  write_metrics_report(os, rows, o.seed);
  out << "eval: axis " << to_string(axis) << " " << r.train_groups << "/" << r.test_groups
      << " groups, accuracy " << format_number(r.eval.accuracy) << ", mpjpe "
      << format_number(r.eval.mpjpe) << " mm, pa_mpjpe " << format_number(r.eval.pa_mpjpe)
      << " mm\n";
  return kExitOk;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  const auto train = train_config(o);
  const auto axis = axis_of(o);
  const fs::path dir = output_dir(o);
  const auto configs = ablation_rows();
  const auto rows = run_ablation(dataset_for(o), axis, configs, {}, train);
  auto os = open_output(dir / "ablation.csv");
  write_ablation_report(os, rows, o.seed);
  for (const auto& r : rows) {
    out << "ablate: " << r.toggles.label() << " accuracy " << format_number(r.eval.accuracy)
        << " mpjpe " << format_number(r.eval.mpjpe) << "\n";
  }
  out << "ablate: full pipeline " << (full_pipeline_leads(rows) ? "leads" : "does not lead")
      << " every ablated variant\n";
  return kExitOk;
}

int cmd_run_pipeline(const Options& o, std::ostream& out) {
  const auto toggles = toggles_of(o);
  const auto train = train_config(o);
  const auto axis = axis_of(o);
  const fs::path dir = output_dir(o);
  const auto split = split_samples(dataset_for(o), axis, o.seed);
  const TrainResult trained = train_toy({}, toggles, split.train, train);
  const auto& model = trained.model;

  std::vector<Prediction> preds(split.test.size());
  parallel_for(preds.size(), 0, [&](std::size_t i) {
    preds[i] = predict(model, split.test[i].clip, toggles);
  });

  auto det = open_output(dir / "detections.csv");
  CsvWriter dcsv(det, o.seed, {"frame_id", "camera_id", "class_id", "score", "cx", "cy", "w", "h"},
                 "configuration=" + toggles.label());
  auto pred = open_output(dir / "predictions.csv");
  CsvWriter pcsv(pred, o.seed,
                 {"sample_id", "subject_id", "view_id", "label", "predicted", "confidence",
                  "mpjpe_mm", "pa_mpjpe_mm"},
                 "configuration=" + toggles.label());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& s = split.test[i];
    const auto& p = preds[i];
    const auto& b = p.box;
    dcsv.row({format_number(std::uint64_t{s.sample_id}), format_number(s.view_id),
              format_number(b.class_id), format_number(b.score), format_number(b.cx),
              format_number(b.cy), format_number(b.w), format_number(b.h)});
    pcsv.row({format_number(std::uint64_t{s.sample_id}), format_number(s.subject_id),
              format_number(s.view_id), kActionNames[static_cast<std::size_t>(s.label_index())],
              kActionNames[static_cast<std::size_t>(p.label)],
              format_number(p.probabilities[p.label]), format_number(mpjpe(p.poses, s.poses)),
              format_number(pa_mpjpe(p.poses, s.poses))});
    if (p.label == s.label_index()) ++correct;
  }
  out << "run-pipeline: " << preds.size() << " test clips, " << correct << " correct -> "
      << dir.string() << "\n";
  return kExitOk;
}

// Classifies a window from the most recent frames of its lowest-id camera.
class StreamClassifier {
 public:
  StreamClassifier(std::uint64_t seed, StageToggles toggles)
      : model_(init_model({}, seed)), toggles_(toggles) {}

  Vector operator()(const SyncWindow& w) {
    const Frame& f = w.frames.begin()->second;
    history_.push_back(f.pixels);
    const std::size_t t = model_.config.frames;
    while (history_.size() > t) history_.pop_front();
    const std::size_t h = f.pixels.dim(0), wd = f.pixels.dim(1);
    Tensor clip({1, t, h, wd});
    for (std::size_t k = 0; k < t; ++k) {
      const std::size_t src = k + history_.size() < t ? 0 : k + history_.size() - t;
      const Tensor& frame = history_[src];
      if (frame.dim(0) != h || frame.dim(1) != wd) throw ShapeError("camera frame size changed");
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < wd; ++x) clip.at(0, k, y, x) = frame.at(y, x) / 255.0;
    }
    return predict(model_, clip, toggles_).probabilities;
  }

 private:
  PipelineModel model_;
  StageToggles toggles_;
  std::deque<Tensor> history_;
};

std::vector<CameraSpec> cameras_of(const Options& o) {
  const std::string& c = o.cameras;
  if (!c.empty() && c.find_first_not_of("0123456789") == std::string::npos) {
    const auto n = c.size() > 3 ? 0ul : std::stoul(c);
    if (n == 0 || n > 64) throw ConfigError("--cameras must be between 1 and 64");
    return default_cameras(n, o.seed);
  }
  if (!fs::is_regular_file(c)) throw ConfigError("camera spec file not found: " + c);
  auto specs = checked([&] { return read_camera_specs(c); });
  if (specs.empty()) throw ConfigError("camera spec file lists no cameras: " + c);
  return specs;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  SimulationConfig config;
  config.cameras = cameras_of(o);
  config.duration_us = checked([&] { return parse_duration_us(o.duration); });
  config.seed = o.seed;
  config.window_period_us = o.window_period_us;
  config.feedback_threshold = o.threshold;
  config.threaded = o.threaded;
  if (o.window_period_us < 0) throw ConfigError("--window-period-us must be nonnegative");
  checked([&] { config.validate(); });
  const fs::path dir = output_dir(o);
  StreamClassifier classifier(o.seed, toggles_of(o));
  const SimulationReport r =
      run_simulation(config, [&](const SyncWindow& w) { return classifier(w); });
  {
    auto os = open_output(dir / "cameras.txt");
    for (const auto& s : config.cameras) os << format_camera_spec(s) << "\n";
  }
  const std::pair<const char*, void (*)(std::ostream&, const SimulationReport&)> sections[] = {
      {"sim_counts.csv", write_counts_csv},
      {"sim_latency.csv", write_latency_csv},
      {"sim_windows.csv", write_windows_csv},
      {"sim_feedback.csv", write_feedback_csv},
  };
  for (const auto& [name, write] : sections) {
    auto os = open_output(dir / name);
    write(os, r);
  }
  out << "simulate: " << config.cameras.size() << " cameras, " << r.produced() << " produced, "
      << r.delivered() << " delivered, " << r.dropped_by_link() << " dropped, "
      << r.windows.size() << " windows, " << r.feedback.size() << " feedback messages\n";
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const auto toggles = toggles_of(o);
  const fs::path dir = output_dir(o);
  const auto samples = dataset_for(o);
  PipelineModel model = init_model({}, o.seed);
  SplitMix64 rng(derive_seed(o.seed, 0x67C));
  for (LinearHead* h : {&model.classifier, &model.pose_head, &model.detector.box_head,
                        &model.detector.score_head}) {
    Vector theta = h->flatten();
    for (auto& v : theta) v = rng.uniform(-0.05, 0.05);
    h->assign(theta);
  }
  const auto& sample = samples.at(rng.below(samples.size()));
  const auto checks = check_trainable_heads(model, toggles, sample, o.lambda);
  constexpr double kTolerance = 1e-4;
  auto os = open_output(dir / "gradcheck.csv");
  CsvWriter csv(os, o.seed,
                {"layer", "parameters", "max_abs_error", "max_rel_error", "worst_index", "pass"},
                "tolerance=1e-4");
  bool ok = true;
  for (const auto& c : checks) {
    const bool pass = c.result.max_rel_error <= kTolerance;
    ok = ok && pass;
    csv.row({c.layer, format_number(std::uint64_t{c.parameters}),
             format_number(c.result.max_abs_error), format_number(c.result.max_rel_error),
             format_number(std::uint64_t{c.result.worst_index}), pass ? "true" : "false"});
    out << "gradcheck: " << c.layer << " max relative error "
        << format_number(c.result.max_rel_error) << (pass ? "" : " FAIL") << "\n";
  }
  if (!ok) throw std::runtime_error("gradient check exceeded tolerance 1e-4");
  return kExitOk;
}

int cmd_complexity(const Options& o, std::ostream& out) {
  const fs::path dir = output_dir(o);
  const ModelConfig config;
  const SyntheticConfig data;
  const auto layers = model_layers(config, data.height, data.width);
  auto os = open_output(dir / "complexity.csv");
  CsvWriter csv(os, o.seed, {"stage", "layer", "weights", "biases", "params", "macs", "shared"},
                "input=1x" + std::to_string(config.frames) + "x" + std::to_string(data.height) +
                    "x" + std::to_string(data.width));
  for (const auto& l : layers) {
    Complexity c = count_layer(l.layer);
    if (l.shared) c.weights = c.biases = 0;
    csv.row({l.stage, l.name, format_number(c.weights), format_number(c.biases),
             format_number(c.params()), format_number(c.macs), l.shared ? "true" : "false"});
  }
  const Complexity total = count_model(layers);
  csv.row({"total", "total", format_number(total.weights), format_number(total.biases),
           format_number(total.params()), format_number(total.macs), "false"});
  out << "complexity: " << total.params() << " parameters, " << total.macs
      << " multiply-accumulates per clip\n";
  return kExitOk;
}

}  // namespace

std::int64_t parse_duration_us(const std::string& text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad duration '" + text + "'");
  }
  const std::string unit = text.substr(used);
  double scale = 0.0;
  if (unit.empty() || unit == "s") scale = 1e6;
  else if (unit == "ms") scale = 1e3;
  else if (unit == "us") scale = 1.0;
  else throw std::invalid_argument("bad duration unit in '" + text + "' (use s, ms or us)");
  const double us = value * scale;
  if (!(us > 0.0) || !std::isfinite(us) || us > 1e15) {
    throw std::invalid_argument("duration must be positive: '" + text + "'");
  }
  return std::llround(us);
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"EITNet desk-scale action recognition toolkit", "eitnet"};
  app.require_subcommand(1, 1);
  Options o;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "root seed for every random stream");
    sub->add_option("--out", o.out, "output directory (default $EITNET_OUT or ./eitnet_out)");
  };
  const auto add_data = [&](CLI::App* sub) {
    sub->add_option("--dataset", o.dataset, "dataset directory from gen-data (default: generate)");
  };
  const auto add_training = [&](CLI::App* sub) {
    sub->add_option("--axis", o.axis, "held-out split axis: subject or view");
    sub->add_option("--lr", o.lr, "base learning rate");
    sub->add_option("--epochs", o.epochs, "maximum epochs");
    sub->add_option("--lambda", o.lambda, "detection regression weight");
  };
  const auto add_toggles = [&](CLI::App* sub) {
    sub->add_option("--toggles", o.toggles, "enabled stages, from det,i3d,tsf");
  };

  std::map<CLI::App*, int (*)(const Options&, std::ostream&)> handlers;
  const auto sub = [&](const char* name, const char* help, int (*fn)(const Options&, std::ostream&)) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s);
    handlers[s] = fn;
    return s;
  };

  auto* gen = sub("gen-data", "render the synthetic dataset", cmd_gen_data);
  gen->add_option("--dataset", o.dataset, "target directory (default <out>/dataset)");

  auto* run = sub("run-pipeline", "train heads, then write detections and predictions for the test split",
                  cmd_run_pipeline);
  add_data(run);
  add_training(run);
  add_toggles(run);

  auto* train = sub("train", "train the heads and write learning curves", cmd_train);
  add_data(train);
  add_training(train);
  add_toggles(train);

  auto* eval = sub("eval", "accuracy, MPJPE and PA-MPJPE over a held-out split", cmd_eval);
  add_data(eval);
  add_training(eval);
  add_toggles(eval);

  auto* ablate = sub("ablate", "full pipeline and single-stage ablations", cmd_ablate);
  add_data(ablate);
  add_training(ablate);

  auto* sim = sub("simulate", "multi-camera streaming simulation", cmd_simulate);
  sim->add_option("--cameras", o.cameras, "camera count or key=value camera spec file");
  sim->add_option("--duration", o.duration, "simulated time, e.g. 2s or 500ms");
  sim->add_option("--window-period-us", o.window_period_us,
                  "synchronization window (default: first camera's frame period)");
  sim->add_option("--threshold", o.threshold, "feedback confidence threshold");
  sim->add_flag("--threaded", o.threaded, "one producer thread per camera");
  add_toggles(sim);

  auto* grad = sub("gradcheck", "finite-difference check of every trainable head", cmd_gradcheck);
  add_data(grad);
  grad->add_option("--lambda", o.lambda, "detection regression weight");
  add_toggles(grad);

  sub("complexity", "parameter and multiply-accumulate counts per layer", cmd_complexity);

  if (argc <= 1) {
    err << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  try {
    return handlers.at(chosen)(o, out);
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: runtime: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace eitnet
