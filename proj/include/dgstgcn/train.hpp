#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dgstgcn/config.hpp"
#include "dgstgcn/network.hpp"
#include "dgstgcn/skeleton.hpp"

namespace dgstgcn {

/// Inverse class frequency, normalized to mean 1. Zero counts are a ConfigError.
std::vector<double> class_balanced_weights(const std::vector<Index> &class_counts);

std::vector<Index> class_counts(const std::vector<int> &labels, Index n_classes);

/// Root-centering followed by modality derivation, applied once per dataset.
Dataset prepare_dataset(const Dataset &ds, Modality modality);

/// Stack sequences into [N, M, C, T, V]; persons beyond M are dropped,
/// missing persons are zero. All sequences must share T.
template <typename Scalar>
Tensor<Scalar> make_batch(const std::vector<SkeletonSequence> &clips, Index persons);

template <typename Scalar>
Var<Scalar> compute_loss(const Var<Scalar> &logits, const std::vector<int> &labels, const TrainConfig &cfg,
                         const std::vector<double> &class_weights);

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double loss = 0;
  double train_acc = 0;
  double wall_ms = 0;
};
nlohmann::json to_json_record(const EpochLog &e);

struct TrainOptions {
  std::string log_path;        // JSON lines; empty: no file
  std::string checkpoint_path; // written at the end, or the last good state on divergence
  std::function<void(const EpochLog &)> on_epoch;
};

struct TrainResult {
  std::vector<EpochLog> log;
};

/// Mini-batch SGD with cosine learning rate. `data` should come from
/// prepare_dataset. Throws NumericalError on divergence after writing the
/// last good checkpoint.
template <typename Scalar>
TrainResult train(Model<Scalar> &model, const Dataset &data, const TrainConfig &cfg, const TrainOptions &opts = {});

struct EvalReport {
  double top1 = 0;
  double mean_class_acc = 0;
  double loss = 0;
  Index n_samples = 0;
  Index n_classes = 0;
  std::vector<std::vector<Index>> confusion; // [true][predicted]
};
nlohmann::json to_json(const EvalReport &r);

/// Class scores for a set of samples (raw model outputs).
struct ScoreSet {
  Index n_classes = 0;
  std::vector<float> scores; // row-major [n_samples, n_classes]
  std::vector<int> labels;

  Index n_samples() const { return static_cast<Index>(labels.size()); }
  friend bool operator==(const ScoreSet &, const ScoreSet &) = default;
};

/// Accuracy report for raw scores; the loss term is the cross entropy of the scores.
EvalReport report_from_scores(const ScoreSet &s);

/// Deterministic evaluation with center sampling; fills `scores` when given.
template <typename Scalar>
EvalReport evaluate(Model<Scalar> &model, const Dataset &data, const AugmentSpec &augment, Index batch_size = 32,
                    ScoreSet *scores = nullptr);

/// Weighted sum of per-model softmax scores (default weights 1).
ScoreSet ensemble_scores(const std::vector<ScoreSet> &sets, std::vector<double> weights = {});
EvalReport ensemble(const std::vector<ScoreSet> &sets, std::vector<double> weights = {});

std::string encode_scores(const ScoreSet &s);
ScoreSet decode_scores(const std::string &bytes);
void write_scores(const std::string &path, const ScoreSet &s);
ScoreSet read_scores(const std::string &path);

} // namespace dgstgcn
