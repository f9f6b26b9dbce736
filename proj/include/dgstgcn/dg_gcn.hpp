#pragma once

#include <random>
#include <string>
#include <vector>

#include "dgstgcn/config.hpp"
#include "dgstgcn/layers.hpp"

namespace dgstgcn {

/// Learnable pieces of the K coefficient matrices of one spatial module.
template <typename Scalar>
struct CoefficientParams {
  Index groups = 1;
  Index width = 1;                 // per-group channels, floor(C_out / K)
  Parameter<Scalar> static_term;   // [K,V,V]; undefined when masked out
  PointwiseConv<Scalar> encoder_a; // C_in -> K*width (dynamic terms only)
  PointwiseConv<Scalar> encoder_b;
  Parameter<Scalar> alpha;         // [K], channel-agnostic weight
  Parameter<Scalar> beta;          // [K], channel-specific weight

  void collect(ParamSink<Scalar> &sink, const std::string &prefix);
};

/// Static term ~ Normal(0, 1/V). The dynamic weights start at 0 when the
/// static term is present (pure static start) and at 1 otherwise.
template <typename Scalar>
CoefficientParams<Scalar> init_coefficients(Index joints, Index groups, Index in_channels, Index out_channels,
                                            const ComponentMask &mask, std::mt19937_64 &rng);

template <typename Scalar>
struct DynamicTerms {
  Var<Scalar> agnostic; // [N,K,V,V], softmax over source joints
  Var<Scalar> specific; // [N,K,width,V,V], tanh of pairwise differences
};

/// Both terms are computed from the temporal mean of x; only the ones
/// enabled in `mask` are returned.
template <typename Scalar>
DynamicTerms<Scalar> dynamic_terms(const Var<Scalar> &x, const CoefficientParams<Scalar> &params,
                                   const ComponentMask &mask);

/// Spatial module: pointwise projection to K groups, per-group joint mixing
/// with the effective coefficient matrices, pointwise projection back.
template <typename Scalar>
class DgGcn {
public:
  DgGcn() = default;
  DgGcn(Index in_channels, Index out_channels, Index joints, const SpatialConfig &cfg, const std::vector<Bone> &bones,
        const NormConfig &norm, std::mt19937_64 &rng);

  Var<Scalar> operator()(const Var<Scalar> &x, bool training);

  /// Effective coefficients for input x: [K,V,V], [N,K,V,V] or [N,K,width,V,V].
  Var<Scalar> coefficients(const Var<Scalar> &x) const;

  void collect(ParamSink<Scalar> &sink, const std::string &prefix);

  const SpatialConfig &config() const { return cfg_; }
  Index groups() const { return coef.groups; }
  Index width() const { return coef.width; }

  PointwiseConv<Scalar> input_proj;
  BatchNorm<Scalar> input_norm;
  CoefficientParams<Scalar> coef;
  Tensor<Scalar> topology;      // fixed / refined modes
  Parameter<Scalar> refinement; // refined mode, zero at init
  PointwiseConv<Scalar> output_proj;
  BatchNorm<Scalar> output_norm;

private:
  SpatialConfig cfg_;
};

} // namespace dgstgcn
