#include "dgstgcn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "dgstgcn/binary_io.hpp"
#include "dgstgcn/ops.hpp"
#include "dgstgcn/optim.hpp"

namespace dgstgcn {

using nlohmann::json;

std::vector<Index> class_counts(const std::vector<int> &labels, Index n_classes) {
  std::vector<Index> counts(static_cast<std::size_t>(n_classes), 0);
  for (int l : labels) {
    if (l < 0 || l >= n_classes) throw DataError("label " + std::to_string(l) + " out of range");
    ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

std::vector<double> class_balanced_weights(const std::vector<Index> &counts) {
  if (counts.empty()) throw ConfigError("class-balanced weights need at least one class");
  std::vector<double> w;
  for (Index c : counts) {
    if (c <= 0) throw ConfigError("class-balanced weights need a positive count for every class");
    w.push_back(1.0 / static_cast<double>(c));
  }
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  for (double &x : w) x /= mean;
  return w;
}

Dataset prepare_dataset(const Dataset &ds, Modality modality) {
  Dataset out;
  out.spec = ds.spec;
  const Index root = ds.spec.bones.empty() ? 0 : root_joint(ds.spec.bones);
  out.samples.reserve(ds.samples.size());
  for (const auto &s : ds.samples) out.samples.push_back(derive_modality(preprocess(s, root), modality, ds.spec.bones));
  return out;
}

template <typename Scalar>
Tensor<Scalar> make_batch(const std::vector<SkeletonSequence> &clips, Index persons) {
  if (clips.empty()) throw DataError("empty batch");
  const Index t = clips.front().frames(), v = clips.front().joints(), c = clips.front().channels();
  const Index n = static_cast<Index>(clips.size());
  Tensor<Scalar> out({n, persons, c, t, v});
  for (Index i = 0; i < n; ++i) {
    const SkeletonSequence &s = clips[static_cast<std::size_t>(i)];
    if (s.frames() != t || s.joints() != v || s.channels() != c)
      throw DataError("batch clips disagree in shape: " + shape_string(s.coords.shape()));
    for (Index p = 0; p < std::min(persons, s.persons()); ++p)
      for (Index f = 0; f < t; ++f)
        for (Index j = 0; j < v; ++j)
          for (Index ch = 0; ch < c; ++ch) out(i, p, ch, f, j) = static_cast<Scalar>(s.coords(p, f, j, ch));
  }
  return out;
}

template <typename Scalar>
Var<Scalar> compute_loss(const Var<Scalar> &logits, const std::vector<int> &labels, const TrainConfig &cfg,
                         const std::vector<double> &class_weights) {
  if (cfg.loss == LossKind::class_balanced_focal) return focal_loss(logits, labels, class_weights, cfg.focal_gamma);
  return cross_entropy(logits, labels);
}

json to_json_record(const EpochLog &e) {
  return {{"epoch", e.epoch}, {"lr", e.lr}, {"loss", e.loss}, {"train_acc", e.train_acc}, {"wall_ms", e.wall_ms}};
}

namespace {

template <typename Scalar>
Index count_correct(const Tensor<Scalar> &logits, const std::vector<int> &labels) {
  const Index classes = logits.dim(1);
  Index correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Index best;
    logits.data().segment(static_cast<Index>(i) * classes, classes).maxCoeff(&best);
    correct += best == labels[i];
  }
  return correct;
}

// Augment clips for positions [begin, end) of the epoch order. Position j is
// always handled by worker j % workers, each with its own generator.
std::vector<SkeletonSequence> augment_range(const Dataset &data, const std::vector<std::size_t> &order,
                                            std::size_t begin, std::size_t end, std::size_t epoch_offset,
                                            const AugmentSpec &spec, std::vector<std::mt19937_64> &rngs) {
  std::vector<SkeletonSequence> clips(end - begin);
  const std::size_t workers = rngs.size();
  auto work = [&](std::size_t w) {
    for (std::size_t j = begin; j < end; ++j)
      if ((epoch_offset + j) % workers == w)
        clips[j - begin] = temporal_augment(data.samples[order[j]], spec, true, rngs[w]);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto &t : threads) t.join();
  }
  return clips;
}

} // namespace

template <typename Scalar>
TrainResult train(Model<Scalar> &model, const Dataset &data, const TrainConfig &cfg, const TrainOptions &opts) {
  cfg.validate();
  if (data.samples.empty()) throw DataError("training set is empty");
  const Index n_classes = model.config().n_classes;
  std::vector<double> weights;
  if (cfg.loss == LossKind::class_balanced_focal)
    weights = class_balanced_weights(class_counts(data.labels(), n_classes));

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::mt19937_64> worker_rngs;
  for (int w = 0; w < cfg.workers; ++w) worker_rngs.emplace_back(cfg.seed + static_cast<std::uint64_t>(w));

  std::ofstream log_file;
  if (!opts.log_path.empty()) {
    log_file.open(opts.log_path, std::ios::trunc);
    if (!log_file) throw DataError("cannot write training log " + opts.log_path);
  }

  TrainResult result;
  std::string last_good = encode_checkpoint(model);
  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr);
    const SgdOptions sgd{lr, cfg.momentum, cfg.weight_decay};
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    Index correct = 0;
    try {
      for (std::size_t b = 0; b < order.size(); b += batch) {
        const std::size_t e = std::min(order.size(), b + batch);
        const auto clips = augment_range(data, order, b, e, static_cast<std::size_t>(epoch) * order.size(), cfg.augment,
                                         worker_rngs);
        std::vector<int> labels;
        for (const auto &c : clips) labels.push_back(c.label);
        const Var<Scalar> logits = model.forward(make_batch<Scalar>(clips, model.config().persons), true);
        const Var<Scalar> loss = compute_loss(logits, labels, cfg, weights);
        const double value = static_cast<double>(loss.value()[0]);
        if (!std::isfinite(value)) throw NumericalError("loss became non-finite in epoch " + std::to_string(epoch));
        loss_sum += value * static_cast<double>(labels.size());
        correct += count_correct(logits.value(), labels);
        backward_and_step(model, loss, sgd);
      }
    } catch (const NumericalError &err) {
      if (!opts.checkpoint_path.empty()) write_file(opts.checkpoint_path, last_good);
      throw NumericalError(std::string("training diverged: ") + err.what() +
                           (opts.checkpoint_path.empty() ? "" : "; last good checkpoint written to " + opts.checkpoint_path));
    }
    EpochLog rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (log_file) log_file << to_json_record(rec).dump() << "\n" << std::flush;
    if (opts.on_epoch) opts.on_epoch(rec);
    last_good = encode_checkpoint(model);
  }
  if (!opts.checkpoint_path.empty()) write_file(opts.checkpoint_path, last_good);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

json to_json(const EvalReport &r) {
  return {{"top1", r.top1},         {"mean_class_acc", r.mean_class_acc}, {"loss", r.loss},
          {"n_samples", r.n_samples}, {"n_classes", r.n_classes},         {"confusion", r.confusion}};
}

namespace {

// probabilities: per-row normalized class probabilities.
EvalReport report_from_probabilities(const std::vector<double> &probs, const std::vector<int> &labels,
                                     Index n_classes) {
  EvalReport r;
  r.n_samples = static_cast<Index>(labels.size());
  r.n_classes = n_classes;
  r.confusion.assign(static_cast<std::size_t>(n_classes), std::vector<Index>(static_cast<std::size_t>(n_classes), 0));
  double loss = 0;
  Index correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double *row = probs.data() + i * static_cast<std::size_t>(n_classes);
    const Index pred = std::max_element(row, row + n_classes) - row;
    const int label = labels[i];
    if (label < 0 || label >= n_classes) throw DataError("label " + std::to_string(label) + " out of range");
    ++r.confusion[static_cast<std::size_t>(label)][static_cast<std::size_t>(pred)];
    correct += pred == label;
    loss -= std::log(std::max(row[label], 1e-300));
  }
  if (!labels.empty()) {
    r.top1 = static_cast<double>(correct) / static_cast<double>(labels.size());
    r.loss = loss / static_cast<double>(labels.size());
  }
  double acc_sum = 0;
  Index present = 0;
  for (Index c = 0; c < n_classes; ++c) {
    const auto &row = r.confusion[static_cast<std::size_t>(c)];
    const Index support = std::accumulate(row.begin(), row.end(), Index{0});
    if (support == 0) continue;
    acc_sum += static_cast<double>(row[static_cast<std::size_t>(c)]) / static_cast<double>(support);
    ++present;
  }
  r.mean_class_acc = present ? acc_sum / static_cast<double>(present) : 0.0;
  return r;
}

std::vector<double> softmax_rows(const ScoreSet &s) {
  std::vector<double> out(s.scores.size());
  const auto k = static_cast<std::size_t>(s.n_classes);
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const float *row = s.scores.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0;
    for (std::size_t c = 0; c < k; ++c) z += out[i * k + c] = std::exp(static_cast<double>(row[c]) - mx);
    for (std::size_t c = 0; c < k; ++c) out[i * k + c] /= z;
  }
  return out;
}

void check_scores(const ScoreSet &s) {
  if (s.n_classes < 1 || s.scores.size() != s.labels.size() * static_cast<std::size_t>(s.n_classes))
    throw DataError("score set has " + std::to_string(s.scores.size()) + " scores for " +
                    std::to_string(s.labels.size()) + " samples of " + std::to_string(s.n_classes) + " classes");
}

} // namespace

EvalReport report_from_scores(const ScoreSet &s) {
  check_scores(s);
  return report_from_probabilities(softmax_rows(s), s.labels, s.n_classes);
}

template <typename Scalar>
EvalReport evaluate(Model<Scalar> &model, const Dataset &data, const AugmentSpec &augment, Index batch_size,
                    ScoreSet *scores) {
  NoGradGuard no_grad;
  ScoreSet out;
  out.n_classes = model.config().n_classes;
  std::mt19937_64 unused(0);
  const auto batch = static_cast<std::size_t>(std::max<Index>(batch_size, 1));
  for (std::size_t b = 0; b < data.samples.size(); b += batch) {
    const std::size_t e = std::min(data.samples.size(), b + batch);
    std::vector<SkeletonSequence> clips;
    for (std::size_t i = b; i < e; ++i) {
      clips.push_back(temporal_augment(data.samples[i], augment, false, unused));
      out.labels.push_back(data.samples[i].label);
    }
    const Var<Scalar> logits = model.forward(make_batch<Scalar>(clips, model.config().persons), false);
    for (Index i = 0; i < logits.value().size(); ++i) out.scores.push_back(static_cast<float>(logits.value()[i]));
  }
  EvalReport r = report_from_scores(out);
  if (scores) *scores = std::move(out);
  return r;
}

ScoreSet ensemble_scores(const std::vector<ScoreSet> &sets, std::vector<double> weights) {
  if (sets.empty()) throw DataError("ensemble of zero score sets");
  if (weights.empty()) weights.assign(sets.size(), 1.0);
  if (weights.size() != sets.size())
    throw DataError(std::to_string(weights.size()) + " ensemble weights for " + std::to_string(sets.size()) + " score sets");
  for (double w : weights)
    if (!(w >= 0) || !std::isfinite(w)) throw DataError("ensemble weights must be finite and non-negative");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total <= 0) throw DataError("ensemble weights sum to zero");
  for (const auto &s : sets) {
    check_scores(s);
    if (s.n_samples() != sets.front().n_samples() || s.n_classes != sets.front().n_classes)
      throw DataError("ensemble inputs disagree: " + std::to_string(s.n_samples()) + "x" + std::to_string(s.n_classes) +
                      " vs " + std::to_string(sets.front().n_samples()) + "x" + std::to_string(sets.front().n_classes));
    if (s.labels != sets.front().labels) throw DataError("ensemble inputs disagree on labels");
  }
  std::vector<double> fused(sets.front().scores.size(), 0.0);
  for (std::size_t m = 0; m < sets.size(); ++m) {
    const auto p = softmax_rows(sets[m]);
    for (std::size_t i = 0; i < p.size(); ++i) fused[i] += weights[m] / total * p[i];
  }
  ScoreSet out{sets.front().n_classes, {}, sets.front().labels};
  out.scores.assign(fused.begin(), fused.end());
  return out;
}

EvalReport ensemble(const std::vector<ScoreSet> &sets, std::vector<double> weights) {
  const ScoreSet fused = ensemble_scores(sets, std::move(weights));
  // Fused scores are already probabilities.
  std::vector<double> probs(fused.scores.begin(), fused.scores.end());
  return report_from_probabilities(probs, fused.labels, fused.n_classes);
}

// ---------------------------------------------------------------------------
// SCR1

std::string encode_scores(const ScoreSet &s) {
  check_scores(s);
  ByteWriter w;
  w.bytes("SCR1");
  w.u32(static_cast<std::uint32_t>(s.labels.size()));
  w.u32(static_cast<std::uint32_t>(s.n_classes));
  for (float v : s.scores) w.f32(v);
  for (int l : s.labels) w.u32(static_cast<std::uint32_t>(l));
  return w.take();
}

ScoreSet decode_scores(const std::string &bytes) {
  ByteReader r(bytes, "SCR1");
  r.expect_magic("SCR1");
  const std::uint32_t n = r.u32();
  const std::uint32_t k = r.u32();
  if (k < 1) r.fail("class count must be positive");
  const std::uint64_t expected = static_cast<std::uint64_t>(n) * k * 4 + static_cast<std::uint64_t>(n) * 4;
  if (expected > r.remaining())
    r.fail("truncated file: " + std::to_string(n) + " samples need " + std::to_string(expected) + " bytes, " +
           std::to_string(r.remaining()) + " left");
  ScoreSet s;
  s.n_classes = k;
  s.scores.resize(static_cast<std::size_t>(n) * k);
  for (auto &v : s.scores) v = r.f32();
  s.labels.resize(n);
  for (auto &l : s.labels) {
    const std::uint32_t v = r.u32();
    if (v >= k) r.fail("label " + std::to_string(v) + " out of range");
    l = static_cast<int>(v);
  }
  if (!r.at_end()) r.fail(std::to_string(r.remaining()) + " trailing bytes");
  return s;
}

void write_scores(const std::string &path, const ScoreSet &s) { write_file(path, encode_scores(s)); }
ScoreSet read_scores(const std::string &path) { return decode_scores(read_file(path)); }

#define DGSTGCN_INSTANTIATE(S)                                                                                         \
  template Tensor<S> make_batch<S>(const std::vector<SkeletonSequence> &, Index);                                      \
  template Var<S> compute_loss<S>(const Var<S> &, const std::vector<int> &, const TrainConfig &,                        \
                                  const std::vector<double> &);                                                        \
  template TrainResult train<S>(Model<S> &, const Dataset &, const TrainConfig &, const TrainOptions &);               \
  template EvalReport evaluate<S>(Model<S> &, const Dataset &, const AugmentSpec &, Index, ScoreSet *);
DGSTGCN_INSTANTIATE(float)
DGSTGCN_INSTANTIATE(double)
#undef DGSTGCN_INSTANTIATE

} // namespace dgstgcn
