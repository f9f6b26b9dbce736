#include <chrono>
#include <cstdio>
#include <filesystem>

#include <unistd.h>

#include "dgstgcn/profiler.hpp"
#include "dgstgcn/train.hpp"
#include "dgstgcn/verify/checks.hpp"
#include "support.hpp"

namespace dgstgcn::verify {

namespace {

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * target; }

ModelConfig static_only(ModelConfig c) {
  c.spatial.mask = {true, false, false};
  return c;
}

ModelConfig with_temporal(ModelConfig c, TemporalMode mode, FusionMode fusion) {
  c.temporal.mode = mode;
  c.temporal.fusion = fusion;
  return c;
}

std::uint64_t walked_params(const ModelConfig &c) {
  Model<float> m(c, 0);
  return count_params(m).total_params;
}

} // namespace

CheckList parameter_counts() {
  CheckList out;
  const ModelConfig full;
  const ModelConfig pa = static_only(full);
  const ModelConfig k9 = with_temporal(pa, TemporalMode::vanilla, FusionMode::off);
  const double n_full = static_cast<double>(walked_params(full));
  const double n_pa = static_cast<double>(walked_params(pa));
  const double n_k9 = static_cast<double>(walked_params(k9));
  out.add("full model 1.69M +-15%", within(n_full, 1.69e6, 0.15), fmt(n_full / 1e6) + "M");
  out.add("static-only 1.25M +-15%", within(n_pa, 1.25e6, 0.15), fmt(n_pa / 1e6) + "M");
  out.add("K9 temporal 2.99M +-15%", within(n_k9, 2.99e6, 0.15), fmt(n_k9 / 1e6) + "M");
  out.add("K9 / multi-group 2.99/1.25 +-15%", within(n_k9 / n_pa, 2.99 / 1.25, 0.15), fmt(n_k9 / n_pa));
  bool formula = true;
  for (const ModelConfig &c : {full, pa, k9})
    formula = formula && count_flops(c).total_params == walked_params(c);
  out.add("closed form equals inventory walk", formula);
  return out;
}

CheckList flop_ratios() {
  CheckList out;
  const ModelConfig pa = static_only(ModelConfig{});
  const ModelConfig k9 = with_temporal(pa, TemporalMode::vanilla, FusionMode::off);
  const ModelConfig mg = with_temporal(pa, TemporalMode::multi_group, FusionMode::off);
  const ModelConfig concat = with_temporal(pa, TemporalMode::multi_group, FusionMode::concat);
  const ModelConfig djsf = with_temporal(pa, TemporalMode::multi_group, FusionMode::djsf);
  for (FlopConvention conv : {FlopConvention::flop, FlopConvention::mac}) {
    FlopOptions o;
    o.frames = 64;
    o.convention = conv;
    auto f = [&](const ModelConfig &c) { return count_flops(c, o).total_flops; };
    const std::string tag = conv == FlopConvention::flop ? " (2 per MAC)" : " (1 per MAC)";
    const double r1 = f(k9) / f(mg), r2 = f(concat) / f(djsf), r3 = f(djsf) / f(mg);
    out.add("K9 / multi-group 2.12 +-10%" + tag, within(r1, 2.12, 0.10), fmt(r1));
    out.add("concat / D-JSF 1.18 +-10%" + tag, within(r2, 1.18, 0.10), fmt(r2));
    out.add("D-JSF / multi-group <= 1.02" + tag, r3 <= 1.02, fmt(r3));
  }
  return out;
}

namespace {

Dataset small_dataset(Index classes, Index per_class, std::uint64_t seed) {
  SynthOptions so;
  so.n_classes = classes;
  so.per_class = per_class;
  so.min_frames = 20;
  so.max_frames = 40;
  so.seed = seed;
  return synth_dataset(so);
}

std::string run_checkpoint(const ModelConfig &mc, const TrainConfig &tc, const Dataset &data) {
  Model<float> m(mc, tc.seed);
  train(m, data, tc);
  return encode_checkpoint(m);
}

} // namespace

CheckList reproducibility() {
  CheckList out;
  Preset p = preset("desk");
  p.model.n_blocks = 2;
  p.model.base_width = 8;
  p.model.downsample_blocks = {2};
  p.train.epochs = 2;
  p.train.batch_size = 8;
  p.train.augment.length = 16;
  p.train.seed = 5;
  const Dataset data = prepare_dataset(small_dataset(4, 6, 9), p.train.modality);

  const std::string a = run_checkpoint(p.model, p.train, data), b = run_checkpoint(p.model, p.train, data);
  out.add("same seed gives identical checkpoints", a == b, std::to_string(a.size()) + " bytes");
  TrainConfig two = p.train;
  two.workers = 3;
  out.add("three workers reproduce the same checkpoint",
          run_checkpoint(p.model, two, data) == run_checkpoint(p.model, two, data));
  TrainConfig other = p.train;
  other.seed = 6;
  out.add("different seed changes the checkpoint", run_checkpoint(p.model, other, data) != a);

  const Dataset raw = small_dataset(3, 4, 17);
  const std::string skl = encode_dataset(raw);
  const Dataset back = decode_dataset(skl, dataset_sidecar(raw));
  out.add("SKL1 round trip", back == raw && encode_dataset(back) == skl);
  const Dataset empty{raw.spec, {}};
  out.add("SKL1 empty dataset", decode_dataset(encode_dataset(empty), dataset_sidecar(empty)) == empty);

  const Model<float> decoded = decode_checkpoint<float>(a);
  Model<float> copy = decoded;
  out.add("DGW1 round trip", encode_checkpoint(copy) == a);

  Model<float> m = decode_checkpoint<float>(a);
  ScoreSet scores;
  evaluate(m, data, p.train.augment, 8, &scores);
  const std::string scr = encode_scores(scores);
  const ScoreSet scores_back = decode_scores(scr);
  out.add("SCR1 round trip", scores_back == scores && encode_scores(scores_back) == scr);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("dgstgcn_repro_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  write_dataset((dir / "d.skl").string(), raw);
  save_checkpoint((dir / "m.dgw").string(), m);
  write_scores((dir / "s.scr").string(), scores);
  Model<float> loaded = load_checkpoint<float>((dir / "m.dgw").string());
  out.add("file round trips", read_dataset((dir / "d.skl").string()) == raw && encode_checkpoint(loaded) == a &&
                                  read_scores((dir / "s.scr").string()) == scores);
  fs::remove_all(dir);
  return out;
}

CheckList ablation_coverage() {
  CheckList out;
  Preset base = preset("desk");
  base.train.epochs = 1;
  base.train.batch_size = 16;
  base.train.augment.length = 16;
  const Dataset data = prepare_dataset(small_dataset(4, 8, 3), base.train.modality);

  auto exercise = [&](const std::string &name, ModelConfig mc) {
    try {
      mc.bones = default_bones(mc.joints);
      Model<float> m(mc, 1);
      const TrainResult r = train(m, data, base.train);
      const auto walk = count_params(m).total_params;
      const CostReport cost = count_flops(mc);
      const bool ok = r.log.size() == 1 && std::isfinite(r.log[0].loss) && walk == cost.total_params &&
                      cost.total_flops > 0;
      out.add(name, ok, "loss " + fmt(r.log.empty() ? NAN : r.log[0].loss) + ", " + std::to_string(walk) + " params");
    } catch (const std::exception &e) {
      out.add(name, false, e.what());
    }
  };

  for (auto [mode, k] : {std::pair{SpatialMode::fixed_topology, Index{3}}, std::pair{SpatialMode::fixed_topology, Index{1}},
                         std::pair{SpatialMode::refined_topology, Index{3}}, std::pair{SpatialMode::from_scratch, Index{8}}}) {
    ModelConfig mc = base.model;
    mc.spatial.mode = mode;
    mc.spatial.groups = k;
    if (mode != SpatialMode::from_scratch) mc.spatial.mask = {true, false, false};
    exercise("spatial " + to_string(mode) + " K=" + std::to_string(k), mc);
  }
  for (Index k : {4, 8, 12})
    for (int bits = 1; bits < 8; ++bits) {
      ModelConfig mc = base.model;
      mc.spatial.groups = k;
      mc.spatial.mask = {(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0};
      exercise("mask " + mc.spatial.mask.to_string() + " K=" + std::to_string(k), mc);
    }
  for (auto [mode, fusion] : {std::pair{TemporalMode::vanilla, FusionMode::off}, std::pair{TemporalMode::multi_group, FusionMode::off},
                              std::pair{TemporalMode::multi_group, FusionMode::concat},
                              std::pair{TemporalMode::multi_group, FusionMode::sum}, std::pair{TemporalMode::multi_group, FusionMode::djsf}}) {
    ModelConfig mc = static_only(base.model);
    mc.temporal.mode = mode;
    mc.temporal.fusion = fusion;
    exercise("temporal " + to_string(mode) + "/" + to_string(fusion), mc);
  }
  return out;
}

CheckList training_sanity() {
  CheckList out;
  const Preset p = preset("desk");
  SynthOptions so;
  so.n_classes = 4;
  so.per_class = 64;
  so.seed = 7;
  const Dataset data = prepare_dataset(synth_dataset(so), p.train.modality);
  Model<float> model(p.model, p.train.seed);
  const auto start = std::chrono::steady_clock::now();
  const TrainResult r = train(model, data, p.train);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;

  double best = 0;
  for (const auto &e : r.log) best = std::max(best, e.train_acc);
  const EvalReport eval = evaluate(model, data, p.train.augment);
  out.add("256 samples, 4 classes", data.samples.size() == 256);
  out.add("train top-1 >= 0.95 within 30 epochs", r.log.size() <= 30 && best >= 0.95,
          "best epoch accuracy " + fmt(best) + ", final " + fmt(r.log.back().train_acc) + ", eval on train set " +
              fmt(eval.top1));
  bool monotone = true;
  std::string windows;
  double previous = INFINITY;
  for (std::size_t w = 0; w + 5 <= r.log.size(); w += 5) {
    double mean = 0;
    for (std::size_t i = w; i < w + 5; ++i) mean += r.log[i].loss / 5.0;
    monotone = monotone && mean < previous;
    previous = mean;
    windows += (windows.empty() ? "" : " ") + fmt(mean);
  }
  out.add("loss decreases over 5-epoch windows", monotone, windows);
  out.add("wall time under 10 minutes", minutes < 10.0, fmt(minutes) + " min");
  return out;
}

} // namespace dgstgcn::verify
