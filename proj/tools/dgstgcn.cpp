#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dgstgcn/error.hpp"
#include "dgstgcn/profiler.hpp"
#include "dgstgcn/runtime.hpp"
#include "dgstgcn/train.hpp"
#include "dgstgcn/verify/checks.hpp"

using namespace dgstgcn;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Common {
  std::string config_path;
  std::string preset_name = "desk";
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string precision = "f32";
  std::optional<int> workers;
};

void add_common(CLI::App *cmd, Common &c) {
  cmd->add_option("--config", c.config_path, "JSON file with optional \"model\" and \"train\" sections");
  cmd->add_option("--preset", c.preset_name, "paper-ablation, paper-sota or desk")->capture_default_str();
  cmd->add_option("--seed", c.seed, "RNG seed (falls back to $DGSTGCN_SEED, then the config)");
  cmd->add_flag("--deterministic", c.deterministic, "fix every RNG from the seed");
  cmd->add_option("--precision", c.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  cmd->add_option("--workers", c.workers, "data loading threads")->check(CLI::PositiveNumber);
}

Preset resolve(const Common &c) {
  Preset p = preset(c.preset_name);
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw DataError("cannot read config " + c.config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception &e) {
      throw ConfigError("config " + c.config_path + ": " + e.what());
    }
    for (const auto &[key, value] : j.items())
      if (key != "model" && key != "train") throw ConfigError("unknown config key '" + key + "' (expected model, train)");
    if (j.contains("model")) p.model = merge_model_config(p.model, j["model"]);
    if (j.contains("train")) p.train = merge_train_config(p.train, j["train"]);
  }
  if (c.seed) {
    p.train.seed = *c.seed;
  } else if (const char *env = std::getenv("DGSTGCN_SEED")) {
    try {
      p.train.seed = std::stoull(env);
    } catch (const std::exception &) {
      throw ConfigError(std::string("DGSTGCN_SEED is not an integer: ") + env);
    }
  }
  if (c.deterministic) p.train.deterministic = true;
  if (c.workers) p.train.workers = *c.workers;
  return p;
}

// The dataset decides the input shape, class count and skeleton.
void fit_to_data(ModelConfig &m, const Dataset &d) {
  m.joints = d.spec.joints;
  m.in_channels = d.spec.channels;
  m.persons = d.spec.max_persons;
  m.n_classes = d.spec.n_classes;
  m.bones = d.spec.bones;
}

void log_resolved(const std::string &command, const Preset &p, const std::string &precision, const json &extra = {}) {
  json j{{"command", command}, {"precision", precision}, {"model", p.model}, {"train", p.train}};
  for (const auto &[k, v] : extra.items()) j[k] = v;
  std::cerr << "resolved config: " << j.dump() << "\n";
}

void write_json(const std::string &path, const json &j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  write_file(path, j.dump(2) + "\n");
}

template <typename Scalar>
int run_train(Preset p, const std::string &precision, const std::string &data_path, const std::string &out,
              const std::string &log_path) {
  const Dataset raw = read_dataset(data_path);
  fit_to_data(p.model, raw);
  p.model.validate();
  log_resolved("train", p, precision, {{"data", data_path}, {"out", out}, {"log", log_path}});
  const Dataset data = prepare_dataset(raw, p.train.modality);
  Model<Scalar> model(p.model, p.train.seed);
  TrainOptions opts;
  opts.log_path = log_path;
  opts.checkpoint_path = out;
  opts.on_epoch = [&](const EpochLog &e) {
    std::fprintf(stderr, "epoch %3d  lr %.5f  loss %.4f  acc %.4f  %.0f ms\n", e.epoch + 1, e.lr, e.loss, e.train_acc,
                 e.wall_ms);
  };
  const TrainResult r = train(model, data, p.train, opts);
  std::cout << to_json_record(r.log.back()).dump() << "\n";
  return kOk;
}

template <typename Scalar>
int run_eval(const Preset &p, const std::string &data_path, const std::string &checkpoint, const std::string &report,
             const std::string &scores_path) {
  Model<Scalar> model = load_checkpoint<Scalar>(checkpoint);
  const Dataset data = prepare_dataset(read_dataset(data_path), p.train.modality);
  if (data.spec.n_classes != model.config().n_classes)
    throw DataError("dataset has " + std::to_string(data.spec.n_classes) + " classes, checkpoint " +
                    std::to_string(model.config().n_classes));
  ScoreSet scores;
  const EvalReport r = evaluate(model, data, p.train.augment, p.train.batch_size, &scores);
  if (!scores_path.empty()) write_scores(scores_path, scores);
  write_json(report, to_json(r));
  return kOk;
}

int run_selftest(bool full) {
  int failed = 0;
  for (const auto &c : verify::acceptance_criteria()) {
    if (c.id == 7 && !full) continue;
    const auto start = std::chrono::steady_clock::now();
    verify::CheckList r;
    try {
      r = c.run();
    } catch (const std::exception &e) {
      r.add("exception", false, e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !r.passed();
    std::printf("%s %d %s: %s [%.2f s]\n", r.passed() ? "PASS" : "FAIL", c.id, c.title.c_str(), r.summary().c_str(), s);
  }
  return failed ? kNumerical : kOk;
}

} // namespace

int main(int argc, char **argv) {
  tune_allocator();
  CLI::App app{"Dynamic-group spatio-temporal GCN for skeleton action recognition"};
  app.require_subcommand(1);
  Common common;

  SynthOptions synth;
  std::string synth_out;
  auto *synth_cmd = app.add_subcommand("synth", "write a synthetic SKL1 dataset");
  synth_cmd->add_option("--classes", synth.n_classes)->capture_default_str();
  synth_cmd->add_option("--per-class", synth.per_class)->capture_default_str();
  synth_cmd->add_option("--joints", synth.joints)->capture_default_str();
  synth_cmd->add_option("--min-frames", synth.min_frames)->capture_default_str();
  synth_cmd->add_option("--max-frames", synth.max_frames)->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "output path; metadata goes to <out>.json")->required();

  std::string data_path, out_path, log_path, checkpoint, report, scores_path;
  auto *train_cmd = app.add_subcommand("train", "train a model and write a DGW1 checkpoint");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", data_path, "SKL1 training set")->required();
  train_cmd->add_option("--out", out_path, "checkpoint path")->required();
  train_cmd->add_option("--log", log_path, "JSON-lines epoch log");

  auto *eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--data", data_path, "SKL1 dataset")->required();
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--report", report, "EvalReport JSON (default stdout)");
  eval_cmd->add_option("--scores", scores_path, "SCR1 score dump");

  std::vector<std::string> score_files;
  std::vector<double> weights;
  auto *ens_cmd = app.add_subcommand("ensemble", "fuse SCR1 score files");
  ens_cmd->add_option("scores", score_files, "SCR1 files")->required();
  ens_cmd->add_option("--weights", weights, "one weight per file (default 1)");
  ens_cmd->add_option("--report", report, "EvalReport JSON (default stdout)");
  ens_cmd->add_option("--out", scores_path, "fused SCR1 scores");

  FlopOptions flop;
  std::string convention = "flop";
  bool as_json = false;
  auto *prof_cmd = app.add_subcommand("profile", "parameter and FLOP report");
  add_common(prof_cmd, common);
  prof_cmd->add_option("--frames", flop.frames)->capture_default_str();
  prof_cmd->add_option("--persons", flop.persons)->capture_default_str();
  prof_cmd->add_option("--convention", convention, "flop (2 per MAC) or mac")
      ->check(CLI::IsMember({"flop", "mac"}))
      ->capture_default_str();
  prof_cmd->add_flag("--elementwise", flop.include_elementwise, "count normalization and activations");
  prof_cmd->add_flag("--json", as_json);

  auto *grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suites");
  bool full = false;
  auto *self_cmd = app.add_subcommand("selftest", "oracle and invariant suites");
  self_cmd->add_flag("--full", full, "include the 30-epoch training check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (synth_cmd->parsed()) {
      std::cerr << "resolved config: "
                << json{{"command", "synth"},     {"classes", synth.n_classes},     {"per_class", synth.per_class},
                        {"joints", synth.joints}, {"min_frames", synth.min_frames}, {"max_frames", synth.max_frames},
                        {"noise", synth.noise},   {"seed", synth.seed}}
                       .dump()
                << "\n";
      write_dataset(synth_out, synth_dataset(synth));
      return kOk;
    }
    if (train_cmd->parsed()) {
      const Preset p = resolve(common);
      return common.precision == "f64" ? run_train<double>(p, common.precision, data_path, out_path, log_path)
                                       : run_train<float>(p, common.precision, data_path, out_path, log_path);
    }
    if (eval_cmd->parsed()) {
      const Preset p = resolve(common);
      log_resolved("eval", p, common.precision, {{"data", data_path}, {"checkpoint", checkpoint}});
      return common.precision == "f64" ? run_eval<double>(p, data_path, checkpoint, report, scores_path)
                                       : run_eval<float>(p, data_path, checkpoint, report, scores_path);
    }
    if (ens_cmd->parsed()) {
      std::vector<ScoreSet> sets;
      for (const auto &f : score_files) sets.push_back(read_scores(f));
      std::cerr << "resolved config: " << json{{"command", "ensemble"}, {"scores", score_files}, {"weights", weights}}.dump()
                << "\n";
      const ScoreSet fused = ensemble_scores(sets, weights);
      if (!scores_path.empty()) write_scores(scores_path, fused);
      write_json(report, to_json(ensemble(sets, weights)));
      return kOk;
    }
    if (prof_cmd->parsed()) {
      const Preset p = resolve(common);
      flop.convention = convention == "mac" ? FlopConvention::mac : FlopConvention::flop;
      log_resolved("profile", p, common.precision);
      Model<float> model(p.model, p.train.seed);
      const CostReport walked = count_params(model);
      const CostReport r = count_flops(p.model, flop);
      if (walked.total_params != r.total_params)
        throw NumericalError("parameter walk (" + std::to_string(walked.total_params) + ") disagrees with closed form (" +
                             std::to_string(r.total_params) + ")");
      if (as_json)
        std::cout << to_json(r).dump(2) << "\n";
      else
        std::cout << format_table(r);
      return kOk;
    }
    if (grad_cmd->parsed()) {
      verify::CheckList r = verify::operator_gradients();
      r.append(verify::composed_gradients());
      for (const auto &c : r.items) std::printf("%s %s  %s\n", c.passed ? "ok  " : "FAIL", c.name.c_str(), c.detail.c_str());
      return r.passed() ? kOk : kNumerical;
    }
    if (self_cmd->parsed()) return run_selftest(full);
  } catch (const ConfigError &e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const FormatError &e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kData;
  } catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DimensionError &e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
