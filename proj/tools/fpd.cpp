#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "fpd/config_json.hpp"
#include "fpd/image_io.hpp"
#include "fpd/metrics.hpp"
#include "fpd/rng.hpp"
#include "fpd/training.hpp"
#include "plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fpd::tools {
namespace {

struct FlagOverrides {
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<double> alpha;
  std::optional<int> stages;
  std::optional<int> channels;
  std::optional<std::string> protocol;
};

struct RunConfig {
  uint64_t seed = 0;
  std::string out_dir = "runs/out";
  HourglassConfig model = HourglassConfig::student();
  TrainConfig train;
  json dataset = {{"type", "synthetic"}, {"count", 64}, {"val_count", 16}};
  EvalProtocol protocol = EvalProtocol::kPckh05;
};

std::optional<std::string> env_var(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

// Precedence: config file < environment < command-line flags.
RunConfig resolve_config(const std::string& config_path, const FlagOverrides& f) {
  RunConfig rc;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config file: " + config_path);
    json doc;
    try {
      doc = json::parse(in);
      rc.seed = doc.value("seed", rc.seed);
      rc.out_dir = doc.value("out_dir", rc.out_dir);
      if (doc.contains("model")) rc.model = doc["model"].get<HourglassConfig>();
      if (doc.contains("train")) rc.train = doc["train"].get<TrainConfig>();
      if (doc.contains("dataset")) rc.dataset = doc["dataset"];
      if (doc.contains("protocol")) {
        rc.protocol = parse_protocol(doc["protocol"].get<std::string>());
      }
    } catch (const json::exception& e) {
      throw ConfigError("bad config file " + config_path + ": " + e.what());
    }
  }

  if (auto v = env_var("FPD_SEED")) rc.seed = std::stoull(*v);
  if (auto v = env_var("FPD_OUT_DIR")) rc.out_dir = *v;
  if (auto v = env_var("FPD_ALPHA")) rc.train.loss.alpha = std::stod(*v);
  if (auto v = env_var("FPD_STAGES")) rc.model.num_stages = std::stoi(*v);
  if (auto v = env_var("FPD_CHANNELS")) rc.model.channels = std::stoi(*v);
  if (auto v = env_var("FPD_PROTOCOL")) rc.protocol = parse_protocol(*v);

  if (f.seed) rc.seed = *f.seed;
  if (f.out_dir) rc.out_dir = *f.out_dir;
  if (f.alpha) rc.train.loss.alpha = *f.alpha;
  if (f.stages) rc.model.num_stages = *f.stages;
  if (f.channels) rc.model.channels = *f.channels;
  if (f.protocol) rc.protocol = parse_protocol(*f.protocol);

  rc.train.seed = rc.seed;  // all randomness flows from the top-level seed
  rc.model.validate();
  rc.train.validate();
  return rc;
}

json resolved_json(const RunConfig& rc) {
  return {{"seed", rc.seed},
          {"out_dir", rc.out_dir},
          {"model", rc.model},
          {"train", rc.train},
          {"dataset", rc.dataset},
          {"protocol", rc.protocol == EvalProtocol::kPckh05 ? "pckh05" : "pck02"}};
}

void write_resolved(const RunConfig& rc, json extra) {
  json doc = resolved_json(rc);
  doc.update(extra);
  std::ofstream out(fs::path(rc.out_dir) / "resolved_config.json");
  out << doc.dump(2) << "\n";
}

struct DataBundle {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

DataBundle materialize_dataset(const RunConfig& rc) {
  DataBundle out;
  const std::string type = rc.dataset.value("type", "synthetic");
  if (type == "synthetic") {
    const int count = rc.dataset.value("count", 64);
    const int val_count = rc.dataset.value("val_count", 16);
    const int joints = rc.dataset.value("joints", rc.model.num_joints);
    auto all = synth_dataset(count + val_count, joints, mix_seed(rc.seed, 0xda7aull));
    out.train.assign(all.begin(), all.begin() + count);
    out.val.assign(all.begin() + count, all.end());
    return out;
  }

  const AnnotationFormat format = parse_annotation_format(type);
  if (!rc.dataset.contains("annotations")) {
    throw ConfigError("dataset.annotations is required for format '" + type + "'");
  }
  const std::string ann_path = rc.dataset["annotations"].get<std::string>();
  const std::string images_root = rc.dataset.value("images_root", std::string());
  auto records = load_annotations(ann_path, format);

  std::vector<AnnotationRecord> train_recs = std::move(records), val_recs;
  const int val_split = rc.dataset.value("val_split", 0);
  if (val_split > 0) {
    auto split = make_validation_split(train_recs, val_split, mix_seed(rc.seed, 0x5e7ull));
    train_recs = std::move(split.first);
    val_recs = std::move(split.second);
  }
  auto to_samples = [&](const std::vector<AnnotationRecord>& recs) {
    std::vector<Sample> samples;
    samples.reserve(recs.size());
    for (const auto& rec : recs) {
      const Image img = load_image(
          images_root.empty() ? rec.image_path
                              : (fs::path(images_root) / rec.image_path).string());
      samples.push_back(crop_and_resize(rec, img));
    }
    return samples;
  };
  out.train = to_samples(train_recs);
  out.val = to_samples(val_recs);
  return out;
}

std::string format_alpha(double a) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", a);
  return buf;
}

class StepLogger {
 public:
  StepLogger(const fs::path& path, double alpha) : out_(path), alpha_(alpha) {
    if (!out_) throw IoError("cannot open log file: " + path.string());
  }

  StepCallback callback() {
    return [this](const StepRecord& r) {
      out_ << json({{"step", r.step},
                    {"epoch", r.epoch},
                    {"mse", r.mse_term},
                    {"distill", r.distill_term},
                    {"total", r.total},
                    {"alpha", r.alpha}})
                  .dump()
           << "\n";
      if (r.step % 50 == 0) {
        std::cout << "  step " << r.step << "  total " << r.total << "  (mse "
                  << r.mse_term << ", distill " << r.distill_term << ")\n";
      }
    };
  }

  void log_validation(const std::vector<std::pair<int, double>>& history) {
    for (const auto& [epoch, metric] : history) {
      out_ << json({{"epoch", epoch}, {"val_metric", metric}, {"alpha", alpha_}}).dump()
           << "\n";
    }
  }

 private:
  std::ofstream out_;
  double alpha_;
};

int cmd_train_teacher(const std::string& config_path, const FlagOverrides& flags) {
  RunConfig rc = resolve_config(config_path, flags);
  fs::create_directories(rc.out_dir);
  write_resolved(rc, {{"command", "train-teacher"}});

  DataBundle data = materialize_dataset(rc);
  std::cout << "training teacher (" << rc.model.num_stages << " stages, "
            << rc.model.channels << " channels) on " << data.train.size()
            << " samples\n";
  StepLogger logger(fs::path(rc.out_dir) / "train_teacher_log.jsonl", 0.0);
  TrainResult result =
      train_teacher(data.train, data.val, rc.model, rc.train, logger.callback());
  logger.log_validation(result.val_history);

  const fs::path ckpt_path = fs::path(rc.out_dir) / "teacher.ckpt";
  save_checkpoint(result.best, ckpt_path.string());
  std::cout << "saved " << ckpt_path.string() << " (epoch " << result.best.epoch
            << ", best val " << result.best.best_metric << ")\n";
  return 0;
}

int cmd_distill(const std::string& config_path, const FlagOverrides& flags,
                std::string teacher_path, const std::string& sweep) {
  RunConfig rc = resolve_config(config_path, flags);
  if (teacher_path.empty()) {
    if (auto v = env_var("FPD_TEACHER_CKPT")) teacher_path = *v;
  }
  if (teacher_path.empty()) {
    throw ConfigError("--teacher-ckpt is required for distill");
  }
  fs::create_directories(rc.out_dir);

  std::vector<double> alphas;
  if (!sweep.empty()) {
    std::stringstream ss(sweep);
    std::string tok;
    while (std::getline(ss, tok, ',')) alphas.push_back(std::stod(tok));
  } else {
    alphas.push_back(rc.train.loss.alpha);
  }
  write_resolved(rc, {{"command", "distill"},
                      {"teacher_ckpt", teacher_path},
                      {"alphas", alphas}});

  const Checkpoint teacher = load_checkpoint(teacher_path);
  DataBundle data = materialize_dataset(rc);

  for (double alpha : alphas) {
    TrainConfig tc = rc.train;
    tc.loss.alpha = alpha;
    tc.loss.validate();
    std::cout << "distilling student (" << rc.model.num_stages << " stages, "
              << rc.model.channels << " channels), alpha " << alpha << "\n";
    StepLogger logger(
        fs::path(rc.out_dir) / ("distill_alpha" + format_alpha(alpha) + ".jsonl"),
        alpha);
    TrainResult result = distill_student(data.train, data.val, teacher, rc.model,
                                         tc, logger.callback());
    logger.log_validation(result.val_history);
    const fs::path ckpt_path =
        fs::path(rc.out_dir) / ("student_alpha" + format_alpha(alpha) + ".ckpt");
    save_checkpoint(result.best, ckpt_path.string());
    std::cout << "saved " << ckpt_path.string() << " (best val "
              << result.best.best_metric << ")\n";
  }
  return 0;
}

int cmd_eval(const std::string& config_path, const FlagOverrides& flags,
             const std::string& ckpt_path) {
  RunConfig rc = resolve_config(config_path, flags);
  fs::create_directories(rc.out_dir);

  // Deployment contract: only the evaluated (student) checkpoint is loaded.
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  auto net = restore_network(ckpt);

  DataBundle data = materialize_dataset(rc);
  const std::vector<Sample>& samples = data.val.empty() ? data.train : data.val;
  std::cout << "evaluating " << ckpt_path << " on " << samples.size()
            << " samples (" << protocol_name(rc.protocol) << ")\n";

  const auto preds = predict_joints(*net, samples);
  std::vector<AnnotationRecord> records;
  records.reserve(samples.size());
  for (const auto& s : samples) records.push_back(s.meta);

  EvalResult res = evaluate(preds, records, rc.protocol);
  res.cost = analyze_model(ckpt.model_config, ckpt.model_config.image_spec());

  const std::string report = format_report(res);
  std::cout << report;
  write_resolved(rc, {{"command", "eval"}, {"ckpt", ckpt_path}});
  {
    std::ofstream out(fs::path(rc.out_dir) / "eval_report.txt");
    out << protocol_name(rc.protocol) << "\n" << report;
  }
  {
    json curve = {{"label", std::string(protocol_name(rc.protocol))},
                  {"thresholds", res.curve.thresholds},
                  {"accuracy", res.curve.accuracy}};
    std::ofstream out(fs::path(rc.out_dir) / "pck_curve.json");
    out << curve.dump(2) << "\n";
  }
  return 0;
}

int cmd_arch_report(const std::string& grid, const std::string& out_dir) {
  std::vector<std::pair<int, int>> entries;
  std::stringstream ss(grid);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const auto x = tok.find('x');
    if (x == std::string::npos) {
      throw ConfigError("bad grid entry '" + tok + "', expected STAGESxCHANNELS");
    }
    entries.emplace_back(std::stoi(tok.substr(0, x)), std::stoi(tok.substr(x + 1)));
  }

  std::string report = "stages  channels  params        flops\n";
  const ImageSpec spec = ImageSpec::standard();
  for (const auto& [stages, channels] : entries) {
    HourglassConfig cfg;
    cfg.num_stages = stages;
    cfg.channels = channels;
    const ModelSpec ms = analyze_model(cfg, spec);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-7d %-9d %-13lld %-13lld (%.2fM, %.2fG)\n",
                  stages, channels, static_cast<long long>(ms.param_count),
                  static_cast<long long>(ms.flops_per_forward),
                  ms.param_count / 1e6, ms.flops_per_forward / 1e9);
    report += buf;
  }
  std::cout << report;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "arch_report.txt");
    out << report;
  }
  return 0;
}

int cmd_plot_curves(const std::string& out_dir,
                    const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw ConfigError("plot-curves: no input files");
  fs::create_directories(out_dir);
  for (const auto& input : inputs) {
    std::ifstream in(input);
    if (!in) throw IoError("cannot open " + input);
    std::vector<Series> series;
    if (fs::path(input).extension() == ".jsonl") {
      Series total{"total", {}, {}}, mse{"mse", {}, {}}, distill{"distill", {}, {}};
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line);
        if (!rec.contains("step")) continue;
        const double step = rec["step"].get<double>();
        total.x.push_back(step);
        total.y.push_back(rec.value("total", 0.0));
        mse.x.push_back(step);
        mse.y.push_back(rec.value("mse", 0.0));
        distill.x.push_back(step);
        distill.y.push_back(rec.value("distill", 0.0));
      }
      if (total.x.empty()) throw DataError("no step records in " + input);
      series = {total, mse, distill};
    } else {
      const json doc = json::parse(in);
      Series s;
      s.label = doc.value("label", fs::path(input).stem().string());
      s.x = doc.at("thresholds").get<std::vector<double>>();
      s.y = doc.at("accuracy").get<std::vector<double>>();
      series = {s};
    }
    const fs::path out_path =
        fs::path(out_dir) / (fs::path(input).stem().string() + ".png");
    const bool is_curve = fs::path(input).extension() != ".jsonl";
    render_plot(out_path.string(), series,
                is_curve ? "PCK curve" : "training loss",
                is_curve ? "threshold" : "step",
                is_curve ? "accuracy" : "loss");
    std::cout << "wrote " << out_path.string() << "\n";
  }
  return 0;
}

}  // namespace
}  // namespace fpd::tools

int main(int argc, char** argv) {
  CLI::App app{"Pose distillation toolkit: train, distill, evaluate and profile "
               "stacked-hourglass pose networks"};
  app.require_subcommand(1);

  std::string config_path, teacher_ckpt, eval_ckpt, sweep, grid, plot_out;
  std::vector<std::string> plot_inputs;
  fpd::tools::FlagOverrides flags;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config");
    cmd->add_option_function<uint64_t>(
        "--seed", [&](uint64_t v) { flags.seed = v; }, "top-level RNG seed");
    cmd->add_option_function<std::string>(
        "--out-dir", [&](std::string v) { flags.out_dir = std::move(v); },
        "output directory");
    cmd->add_option_function<int>(
        "--stages", [&](int v) { flags.stages = v; }, "hourglass stages");
    cmd->add_option_function<int>(
        "--channels", [&](int v) { flags.channels = v; }, "channels per layer");
    cmd->add_option_function<double>(
        "--alpha", [&](double v) { flags.alpha = v; }, "distillation weight");
    cmd->add_option_function<std::string>(
        "--protocol", [&](std::string v) { flags.protocol = std::move(v); },
        "pckh05 or pck02");
  };

  CLI::App* train = app.add_subcommand("train-teacher", "stage (i): supervised training");
  add_common(train);

  CLI::App* distill = app.add_subcommand("distill", "stage (ii): student distillation");
  add_common(distill);
  distill->add_option("--teacher-ckpt", teacher_ckpt, "frozen teacher checkpoint");
  distill->add_option("--alpha-sweep", sweep, "comma-separated alphas, one run each");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--ckpt", eval_ckpt, "checkpoint to evaluate")->required();

  CLI::App* arch = app.add_subcommand("arch-report", "parameter/FLOP cost table");
  arch->add_option("--grid", grid, "STAGESxCHANNELS pairs, comma separated")
      ->default_val("8x256,4x256,2x256,1x256,4x128,4x64,4x32");
  std::string arch_out;
  arch->add_option("--out-dir", arch_out, "optional output directory");

  CLI::App* plot = app.add_subcommand("plot-curves", "render curve/log files to PNG");
  plot->add_option("--out", plot_out, "output directory")->required();
  plot->add_option("files", plot_inputs, "curve .json / log .jsonl files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return fpd::tools::cmd_train_teacher(config_path, flags);
    if (distill->parsed()) {
      return fpd::tools::cmd_distill(config_path, flags, teacher_ckpt, sweep);
    }
    if (eval->parsed()) return fpd::tools::cmd_eval(config_path, flags, eval_ckpt);
    if (arch->parsed()) return fpd::tools::cmd_arch_report(grid, arch_out);
    if (plot->parsed()) return fpd::tools::cmd_plot_curves(plot_out, plot_inputs);
  } catch (const fpd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
