#include "dgstgcn/dg_gcn.hpp"

#include <cmath>

#include "dgstgcn/skeleton.hpp"

namespace dgstgcn {

template <typename Scalar>
void CoefficientParams<Scalar>::collect(ParamSink<Scalar> &sink, const std::string &prefix) {
  sink.add(prefix + ".static", static_term);
  if (encoder_a.weight.defined()) {
    encoder_a.collect(sink, prefix + ".encoder_a");
    encoder_b.collect(sink, prefix + ".encoder_b");
  }
  sink.add(prefix + ".alpha", alpha);
  sink.add(prefix + ".beta", beta);
}

template <typename Scalar>
CoefficientParams<Scalar> init_coefficients(Index joints, Index groups, Index in_channels, Index out_channels,
                                            const ComponentMask &mask, std::mt19937_64 &rng) {
  if (groups < 1) throw ConfigError("group count K must be >= 1");
  if (out_channels < groups)
    throw ConfigError("module width " + std::to_string(out_channels) + " is smaller than K=" + std::to_string(groups));
  if (!mask.any()) throw ConfigError("coefficient component mask is empty");
  CoefficientParams<Scalar> p;
  p.groups = groups;
  p.width = out_channels / groups;
  if (mask.pa)
    p.static_term = Parameter<Scalar>(
        normal_tensor<Scalar>({groups, joints, joints}, 1.0 / std::sqrt(static_cast<double>(joints)), rng));
  if (mask.dynamic()) {
    p.encoder_a = PointwiseConv<Scalar>(in_channels, groups * p.width, true, rng);
    p.encoder_b = PointwiseConv<Scalar>(in_channels, groups * p.width, true, rng);
  }
  const Scalar start = mask.pa ? Scalar(0) : Scalar(1);
  if (mask.da) p.alpha = Parameter<Scalar>(Tensor<Scalar>({groups}, start));
  if (mask.ca) p.beta = Parameter<Scalar>(Tensor<Scalar>({groups}, start));
  return p;
}

template <typename Scalar>
DynamicTerms<Scalar> dynamic_terms(const Var<Scalar> &x, const CoefficientParams<Scalar> &params,
                                   const ComponentMask &mask) {
  DynamicTerms<Scalar> out;
  if (!mask.dynamic()) return out;
  if (x.shape().size() != 4) throw DimensionError("dynamic_terms: input must be [N,C,T,V], got " + shape_string(x.shape()));
  const Index n = x.dim(0), v = x.dim(3);
  const Shape grouped{n, params.groups, params.width, v};
  const Var<Scalar> pooled = mean(x, 2);
  const Var<Scalar> a = reshape(params.encoder_a(pooled), grouped);
  const Var<Scalar> b = reshape(params.encoder_b(pooled), grouped);
  if (mask.da) out.agnostic = softmax(group_gram(a, b), 2);
  if (mask.ca) out.specific = tanh(pairwise_difference(a, b));
  return out;
}

template <typename Scalar>
DgGcn<Scalar>::DgGcn(Index in_channels, Index out_channels, Index joints, const SpatialConfig &cfg,
                     const std::vector<Bone> &bones, const NormConfig &norm, std::mt19937_64 &rng)
    : cfg_(cfg) {
  const Index k = cfg.groups;
  if (k < 1 || out_channels < k)
    throw ConfigError("module width " + std::to_string(out_channels) + " is smaller than K=" + std::to_string(k));
  const Index inner = k * (out_channels / k);
  input_proj = PointwiseConv<Scalar>(in_channels, inner, true, rng);
  input_norm = BatchNorm<Scalar>(inner, norm.eps, norm.momentum);
  if (cfg.mode == SpatialMode::from_scratch) {
    coef = init_coefficients<Scalar>(joints, k, in_channels, out_channels, cfg.mask, rng);
  } else {
    if (!(cfg.mask == ComponentMask{true, false, false}))
      throw ConfigError("topology modes use the skeleton graph in place of the static term; mask must be 'pa'");
    if (bones.empty()) throw ConfigError(to_string(cfg.mode) + " requires the dataset bone list");
    coef.groups = k;
    coef.width = out_channels / k;
    topology = topology_partitions(bones, joints, k).template cast<Scalar>();
    if (cfg.mode == SpatialMode::refined_topology) refinement = Parameter<Scalar>(Tensor<Scalar>(topology.shape()));
  }
  output_proj = PointwiseConv<Scalar>(inner, out_channels, true, rng);
  output_norm = BatchNorm<Scalar>(out_channels, norm.eps, norm.momentum);
}

template <typename Scalar>
Var<Scalar> DgGcn<Scalar>::coefficients(const Var<Scalar> &x) const {
  switch (cfg_.mode) {
  case SpatialMode::fixed_topology:
    return Var<Scalar>(topology);
  case SpatialMode::refined_topology:
    return add(Var<Scalar>(topology), refinement.var());
  case SpatialMode::from_scratch:
    break;
  }
  if (!cfg_.mask.dynamic()) return coef.static_term.var();
  const DynamicTerms<Scalar> terms = dynamic_terms(x, coef, cfg_.mask);
  if ((terms.agnostic.defined() && !terms.agnostic.value().all_finite()) ||
      (terms.specific.defined() && !terms.specific.value().all_finite()))
    throw NumericalError("non-finite dynamic coefficient terms");
  return combine_coefficients(coef.static_term.var(), coef.alpha.var(), terms.agnostic, coef.beta.var(),
                              terms.specific);
}

template <typename Scalar>
Var<Scalar> DgGcn<Scalar>::operator()(const Var<Scalar> &x, bool training) {
  const Var<Scalar> a = coefficients(x);
  const Var<Scalar> h = input_norm(input_proj(x), training);
  return output_norm(output_proj(graph_mix(h, a, coef.groups)), training);
}

template <typename Scalar>
void DgGcn<Scalar>::collect(ParamSink<Scalar> &sink, const std::string &prefix) {
  input_proj.collect(sink, prefix + ".input_proj");
  input_norm.collect(sink, prefix + ".input_norm");
  coef.collect(sink, prefix + ".coef");
  sink.add(prefix + ".refinement", refinement);
  output_proj.collect(sink, prefix + ".output_proj");
  output_norm.collect(sink, prefix + ".output_norm");
}

#define DGSTGCN_INSTANTIATE(S)                                                                                         \
  template struct CoefficientParams<S>;                                                                                \
  template CoefficientParams<S> init_coefficients<S>(Index, Index, Index, Index, const ComponentMask &,                \
                                                     std::mt19937_64 &);                                               \
  template DynamicTerms<S> dynamic_terms<S>(const Var<S> &, const CoefficientParams<S> &, const ComponentMask &);      \
  template class DgGcn<S>;
DGSTGCN_INSTANTIATE(float)
DGSTGCN_INSTANTIATE(double)
#undef DGSTGCN_INSTANTIATE

} // namespace dgstgcn
