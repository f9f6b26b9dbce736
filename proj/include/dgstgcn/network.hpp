#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dgstgcn/config.hpp"
#include "dgstgcn/dg_gcn.hpp"
#include "dgstgcn/dg_tcn.hpp"
#include "dgstgcn/layers.hpp"
#include "dgstgcn/optim.hpp"

namespace dgstgcn {

/// relu(temporal(relu(spatial(x))) + residual(x)).
template <typename Scalar>
struct Block {
  BlockShape shape;
  DgGcn<Scalar> spatial;
  DgTcn<Scalar> temporal;
  bool projected = false; // residual needs a strided pointwise projection
  TemporalConv<Scalar> residual;
  BatchNorm<Scalar> residual_norm;

  Var<Scalar> operator()(const Var<Scalar> &x, bool training);
  void collect(ParamSink<Scalar> &sink, const std::string &prefix);
};

template <typename Scalar>
class Model {
public:
  Model() = default;
  Model(const ModelConfig &config, std::uint64_t seed);

  /// batch [N, M, C, T, V] -> logits [N, n_classes]. All-zero persons are
  /// left out of the person average.
  Var<Scalar> forward(const Tensor<Scalar> &batch, bool training);

  /// Parameters and running statistics in a fixed order.
  ParamSink<Scalar> inventory();
  std::vector<NamedParameter<Scalar>> parameters() { return inventory().params; }
  std::vector<NamedBuffer<Scalar>> buffers() { return inventory().buffers; }
  void zero_grad();

  const ModelConfig &config() const { return config_; }

  std::vector<Block<Scalar>> blocks;
  PointwiseConv<Scalar> head;

private:
  ModelConfig config_;
  std::mt19937_64 dropout_rng_;
};

template <typename Scalar>
Model<Scalar> build_model(const ModelConfig &config, std::uint64_t seed) {
  return Model<Scalar>(config, seed);
}

/// Person weights for a [N, M, ...] batch: 1/present among non-zero persons,
/// uniform when a sample has none.
template <typename Scalar>
std::vector<Scalar> person_weights(const Tensor<Scalar> &batch);

/// Backpropagate `loss`, take one SGD step and clear the gradients.
template <typename Scalar>
void backward_and_step(Model<Scalar> &model, const Var<Scalar> &loss, const SgdOptions &opts);

// DGW1 checkpoints: config JSON plus every parameter and running statistic.
template <typename Scalar>
std::string encode_checkpoint(Model<Scalar> &model);
template <typename Scalar>
Model<Scalar> decode_checkpoint(const std::string &bytes);
template <typename Scalar>
void save_checkpoint(const std::string &path, Model<Scalar> &model);
template <typename Scalar>
Model<Scalar> load_checkpoint(const std::string &path);

} // namespace dgstgcn
