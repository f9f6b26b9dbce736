#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "dgstgcn/train.hpp"

using namespace dgstgcn;
using T = Tensor<double>;
using V = Var<double>;

namespace {

T randn(Shape s, std::mt19937_64 &rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  T t(std::move(s));
  for (Index i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

double direct_cross_entropy(const T &logits, const std::vector<int> &labels) {
  const Index classes = logits.dim(1);
  double total = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    double denom = 0;
    for (Index k = 0; k < classes; ++k) denom += std::exp(logits(n, k));
    total -= std::log(std::exp(logits(n, labels[n])) / denom);
  }
  return total / static_cast<double>(labels.size());
}

// Two blocks of width 8 over the synthetic 25-joint data.
ModelConfig small_model() {
  ModelConfig c;
  c.n_blocks = 2;
  c.base_width = 8;
  c.downsample_blocks = {2};
  c.spatial.groups = 2;
  c.n_classes = 4;
  return c;
}

TrainConfig short_run(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 8;
  t.augment.length = 16;
  t.seed = 3;
  return t;
}

Dataset small_data(Index per_class, Modality modality = Modality::joint) {
  SynthOptions so;
  so.per_class = per_class;
  so.min_frames = 20;
  so.max_frames = 30;
  so.seed = 11;
  return prepare_dataset(synth_dataset(so), modality);
}

ScoreSet make_scores(const std::vector<std::vector<float>> &rows, std::vector<int> labels) {
  ScoreSet s;
  s.n_classes = static_cast<Index>(rows.front().size());
  for (const auto &r : rows) s.scores.insert(s.scores.end(), r.begin(), r.end());
  s.labels = std::move(labels);
  return s;
}

void check_same(const EvalReport &a, const EvalReport &b) {
  CHECK(a.top1 == b.top1);
  CHECK(a.mean_class_acc == b.mean_class_acc);
  CHECK(a.confusion == b.confusion);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-6));
}

} // namespace

TEST_CASE("cross entropy") {
  CHECK(cross_entropy(V(T({2, 4})), {0, 3}).value()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  T confident({1, 3}, {60.0, 0.0, 0.0});
  CHECK(cross_entropy(V(confident), {0}).value()[0] < 1e-20);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const T logits = randn({5, 6}, rng, 4.0);
    const std::vector<int> labels{0, 5, 2, 2, 3};
    CHECK(std::abs(cross_entropy(V(logits), labels).value()[0] - direct_cross_entropy(logits, labels)) < 1e-6);
  }
  T huge({1, 2}, {1000.0, -1000.0});
  CHECK(std::isfinite(cross_entropy(V(huge), {1}).value()[0]));
  CHECK_THROWS_AS(cross_entropy(V(T({1, 3})), {3}), DataError);
}

TEST_CASE("class balanced focal loss") {
  std::mt19937_64 rng(2);
  const T logits = randn({6, 4}, rng);
  const std::vector<int> labels{0, 1, 2, 3, 1, 0};
  const auto balanced = class_balanced_weights({5, 5, 5, 5});
  for (double w : balanced) CHECK(w == doctest::Approx(1.0));
  CHECK(focal_loss(V(logits), labels, balanced, 0.0).value()[0] ==
        doctest::Approx(cross_entropy(V(logits), labels).value()[0]).epsilon(1e-12));
  T confident({1, 2}, {60.0, 0.0});
  CHECK(focal_loss(V(confident), {0}, {1.0, 1.0}, 2.0).value()[0] < 1e-20);

  const auto w = class_balanced_weights({10, 20, 10});
  CHECK(w[1] == doctest::Approx(w[0] / 2));
  CHECK((w[0] + w[1] + w[2]) / 3 == doctest::Approx(1.0));
  CHECK_THROWS_AS(class_balanced_weights({3, 0, 2}), ConfigError);
}

TEST_CASE("evaluation reports") {
  Model<double> m(small_model(), 1);
  m.head.weight.value().set_zero();
  const Dataset data = small_data(4);
  const EvalReport chance = evaluate(m, data, AugmentSpec{AugmentStrategy::uniform_sample, 16}, 8);
  CHECK(chance.top1 == doctest::Approx(0.25));
  CHECK(chance.loss == doctest::Approx(std::log(4.0)).epsilon(1e-9));

  Model<double> trained(small_model(), 2);
  const EvalReport r = evaluate(trained, data, AugmentSpec{AugmentStrategy::uniform_sample, 16}, 8);
  CHECK(r.n_samples == 16);
  CHECK(r.mean_class_acc == doctest::Approx(r.top1));
  Index trace = 0, total = 0;
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    Index row = 0;
    for (Index c : r.confusion[i]) row += c;
    CHECK(row == 4);
    trace += r.confusion[i][i];
    total += row;
  }
  CHECK(static_cast<double>(trace) / static_cast<double>(total) == doctest::Approx(r.top1));

  const EvalReport again = evaluate(trained, data, AugmentSpec{AugmentStrategy::uniform_sample, 16}, 8);
  CHECK(to_json(again) == to_json(r));
}

TEST_CASE("score ensembles") {
  const ScoreSet a = make_scores({{2, 1, 0}, {0, 3, 1}, {1, 0, 0.5f}}, {0, 2, 2});
  const ScoreSet b = make_scores({{0, 1, 4}, {0, 0, 2}, {3, 0, 0}}, {0, 2, 2});
  check_same(ensemble({a}), report_from_scores(a));
  check_same(ensemble({a, a}), report_from_scores(a));
  check_same(ensemble({a, b}, {1, 3}), ensemble({a, b}, {0.5, 1.5}));

  const ScoreSet fused = ensemble_scores({a, b});
  CHECK(fused.labels == a.labels);
  REQUIRE(fused.scores.size() == a.scores.size());
  for (Index n = 0; n < 3; ++n) {
    double sum = 0;
    for (Index k = 0; k < 3; ++k) sum += fused.scores[static_cast<std::size_t>(n * 3 + k)];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }

  ScoreSet short_set = b;
  short_set.scores.resize(6);
  short_set.labels.resize(2);
  CHECK_THROWS_AS(ensemble({a, short_set}), DataError);
  ScoreSet relabelled = b;
  relabelled.labels[0] = 1;
  CHECK_THROWS_AS(ensemble({a, relabelled}), DataError);
  CHECK_THROWS_AS(ensemble({a, b}, {1.0}), DataError);
}

TEST_CASE("training log and determinism") {
  const auto dir = std::filesystem::temp_directory_path() / "dgstgcn_train_test";
  std::filesystem::create_directories(dir);
  const Dataset data = small_data(4);
  TrainOptions opts;
  opts.log_path = (dir / "log.jsonl").string();
  opts.checkpoint_path = (dir / "model.dgw").string();
  Model<float> a(small_model(), 5);
  const TrainResult ra = train(a, data, short_run(2), opts);
  REQUIRE(ra.log.size() == 2);
  CHECK(ra.log[0].lr == doctest::Approx(0.1));
  CHECK(ra.log[1].lr == doctest::Approx(0.05));

  std::ifstream log(opts.log_path);
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char *key : {"epoch", "lr", "loss", "train_acc", "wall_ms"}) CHECK(j.contains(key));
    CHECK(j.at("epoch").get<int>() == ra.log[static_cast<std::size_t>(lines)].epoch);
    ++lines;
  }
  CHECK(lines == 2);
  CHECK(encode_checkpoint(a) == read_file(opts.checkpoint_path));

  Model<float> b(small_model(), 5);
  const TrainResult rb = train(b, data, short_run(2));
  CHECK(rb.log.back().loss == ra.log.back().loss);
  CHECK(encode_checkpoint(b) == encode_checkpoint(a));
  std::filesystem::remove_all(dir);
}

TEST_CASE("divergence writes the last good checkpoint") {
  const auto dir = std::filesystem::temp_directory_path() / "dgstgcn_diverge_test";
  std::filesystem::create_directories(dir);
  const Dataset data = small_data(4);
  Model<float> m(small_model(), 6);
  TrainOptions opts;
  opts.checkpoint_path = (dir / "model.dgw").string();
  TrainConfig cfg = short_run(3);
  cfg.lr = 1e30;
  CHECK_THROWS_AS(train(m, data, cfg, opts), NumericalError);
  REQUIRE(std::filesystem::exists(opts.checkpoint_path));
  const std::string written = read_file(opts.checkpoint_path);
  CHECK(written.substr(0, 4) == "DGW1");
  CHECK_NOTHROW(decode_checkpoint<float>(written));
  std::filesystem::remove_all(dir);

  TrainConfig empty = short_run(1);
  CHECK_THROWS_AS(train(m, Dataset{}, empty), DataError);
  empty.epochs = 0;
  CHECK_THROWS_AS(train(m, data, empty), ConfigError);
}

TEST_CASE("joint and bone ensemble is no worse than either stream") {
  std::vector<ScoreSet> streams;
  std::vector<double> singles;
  for (Modality modality : {Modality::joint, Modality::bone}) {
    const Dataset data = small_data(16, modality);
    Model<float> m(small_model(), 7);
    train(m, data, short_run(6));
    ScoreSet s;
    singles.push_back(evaluate(m, data, short_run(1).augment, 16, &s).top1);
    streams.push_back(s);
  }
  const double fused = ensemble(streams).top1;
  MESSAGE("joint " << singles[0] << " bone " << singles[1] << " fused " << fused);
  CHECK(fused >= std::max(singles[0], singles[1]) - 0.01);
}
