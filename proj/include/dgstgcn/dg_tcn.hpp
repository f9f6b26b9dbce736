#pragma once

#include <random>
#include <string>
#include <vector>

#include "dgstgcn/config.hpp"
#include "dgstgcn/layers.hpp"

namespace dgstgcn {

/// One parallel temporal path operating on a channel slice.
template <typename Scalar>
struct TemporalBranch {
  Branch spec;
  Index width = 0;
  Index stride = 1;
  TemporalConv<Scalar> conv; // conv and pointwise kinds
  BatchNorm<Scalar> norm;

  Var<Scalar> operator()(const Var<Scalar> &x, bool training);
};

/// Temporal module: either a single wide convolution or the multi-branch
/// design, optionally fusing the joint-averaged skeleton feature back into
/// every joint.
template <typename Scalar>
class DgTcn {
public:
  DgTcn() = default;
  DgTcn(Index channels, Index stride, Index joints, const TemporalConfig &cfg, const NormConfig &norm,
        std::mt19937_64 &rng);

  Var<Scalar> operator()(const Var<Scalar> &x, bool training);

  /// Shared input projection, branches and concat, applied to whatever joint
  /// columns x carries.
  Var<Scalar> branches_forward(const Var<Scalar> &x, bool training);

  void collect(ParamSink<Scalar> &sink, const std::string &prefix);

  const TemporalConfig &config() const { return cfg_; }
  Index stride() const { return stride_; }

  TemporalConv<Scalar> vanilla;
  BatchNorm<Scalar> vanilla_norm;

  PointwiseConv<Scalar> input_proj;
  BatchNorm<Scalar> input_norm;
  std::vector<TemporalBranch<Scalar>> branches;
  Parameter<Scalar> gamma;     // [V], learned per-joint fusion weight (djsf)
  Tensor<Scalar> fixed_gamma;  // [V] ones (sum)
  PointwiseConv<Scalar> output_proj;
  BatchNorm<Scalar> output_norm;

private:
  TemporalConfig cfg_;
  Index stride_ = 1;
  Index joints_ = 0;
};

} // namespace dgstgcn
