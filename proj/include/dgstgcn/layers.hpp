#pragma once

#include <random>
#include <string>
#include <vector>

#include "dgstgcn/autodiff.hpp"
#include "dgstgcn/ops.hpp"

namespace dgstgcn {

/// Flat inventory of a module tree, filled by each module's collect().
template <typename Scalar>
struct ParamSink {
  std::vector<NamedParameter<Scalar>> params;
  std::vector<NamedBuffer<Scalar>> buffers;

  void add(const std::string &name, Parameter<Scalar> &p) {
    if (p.defined()) params.push_back({name, &p});
  }
  void add_buffer(const std::string &name, Tensor<Scalar> &t) { buffers.push_back({name, &t}); }
};

/// He-normal weights (std sqrt(2 / fan_in)).
template <typename Scalar>
Tensor<Scalar> he_normal(Shape shape, Index fan_in, std::mt19937_64 &rng);

template <typename Scalar>
Tensor<Scalar> normal_tensor(Shape shape, double stddev, std::mt19937_64 &rng);

/// 1x1 convolution over the channel axis; also serves as the affine head.
template <typename Scalar>
struct PointwiseConv {
  Parameter<Scalar> weight; // [out, in]
  Parameter<Scalar> bias;   // [out] or undefined

  PointwiseConv() = default;
  PointwiseConv(Index in, Index out, bool with_bias, std::mt19937_64 &rng);

  Index in_channels() const { return weight.value().dim(1); }
  Index out_channels() const { return weight.value().dim(0); }
  Var<Scalar> operator()(const Var<Scalar> &x) const { return pointwise_conv(x, weight.var(), bias.var()); }
  void collect(ParamSink<Scalar> &sink, const std::string &prefix);
};

template <typename Scalar>
struct TemporalConv {
  Parameter<Scalar> weight; // [out, in, kernel]
  Parameter<Scalar> bias;   // [out] or undefined
  Index dilation = 1;
  Index stride = 1;

  TemporalConv() = default;
  TemporalConv(Index in, Index out, Index kernel, Index dilation, Index stride, bool with_bias, std::mt19937_64 &rng);

  Var<Scalar> operator()(const Var<Scalar> &x) const {
    return temporal_conv(x, weight.var(), bias.var(), dilation, stride);
  }
  void collect(ParamSink<Scalar> &sink, const std::string &prefix);
};

/// Per-channel batch normalization; scale 1, shift 0, running stats (0, 1) at init.
template <typename Scalar>
struct BatchNorm {
  Parameter<Scalar> scale;
  Parameter<Scalar> shift;
  Tensor<Scalar> running_mean;
  Tensor<Scalar> running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNorm() = default;
  BatchNorm(Index channels, double eps, double momentum);

  Var<Scalar> operator()(const Var<Scalar> &x, bool training) {
    return batch_norm(x, scale.var(), shift.var(), running_mean, running_var, {training, eps, momentum});
  }
  void collect(ParamSink<Scalar> &sink, const std::string &prefix);
};

} // namespace dgstgcn
