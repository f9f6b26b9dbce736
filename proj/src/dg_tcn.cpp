#include "dgstgcn/dg_tcn.hpp"

namespace dgstgcn {

template <typename Scalar>
Var<Scalar> TemporalBranch<Scalar>::operator()(const Var<Scalar> &x, bool training) {
  if (spec.kind == BranchKind::max_pool) return temporal_max_pool(x, spec.kernel, stride);
  return norm(conv(x), training);
}

template <typename Scalar>
DgTcn<Scalar>::DgTcn(Index channels, Index stride, Index joints, const TemporalConfig &cfg, const NormConfig &norm,
                     std::mt19937_64 &rng)
    : cfg_(cfg), stride_(stride), joints_(joints) {
  if (cfg.mode == TemporalMode::vanilla) {
    if (cfg.fusion != FusionMode::off) throw ConfigError("joint-skeleton fusion requires the multi-group temporal module");
    vanilla = TemporalConv<Scalar>(channels, channels, cfg.vanilla_kernel, 1, stride, true, rng);
    vanilla_norm = BatchNorm<Scalar>(channels, norm.eps, norm.momentum);
    return;
  }
  const std::vector<Index> widths = branch_widths(channels, cfg.branches);
  input_proj = PointwiseConv<Scalar>(channels, channels, true, rng);
  input_norm = BatchNorm<Scalar>(channels, norm.eps, norm.momentum);
  for (std::size_t i = 0; i < cfg.branches.size(); ++i) {
    TemporalBranch<Scalar> b;
    b.spec = cfg.branches[i];
    b.width = widths[i];
    b.stride = stride;
    if (b.spec.kind != BranchKind::max_pool) {
      const Index kernel = b.spec.kind == BranchKind::pointwise ? 1 : b.spec.kernel;
      b.conv = TemporalConv<Scalar>(b.width, b.width, kernel, b.spec.dilation, stride, true, rng);
      b.norm = BatchNorm<Scalar>(b.width, norm.eps, norm.momentum);
    }
    branches.push_back(std::move(b));
  }
  if (cfg.fusion == FusionMode::djsf) gamma = Parameter<Scalar>(Tensor<Scalar>({joints}));
  if (cfg.fusion == FusionMode::sum) fixed_gamma = Tensor<Scalar>({joints}, Scalar(1));
  const Index fused = cfg.fusion == FusionMode::concat ? 2 * channels : channels;
  output_proj = PointwiseConv<Scalar>(fused, channels, true, rng);
  output_norm = BatchNorm<Scalar>(channels, norm.eps, norm.momentum);
}

template <typename Scalar>
Var<Scalar> DgTcn<Scalar>::branches_forward(const Var<Scalar> &x, bool training) {
  Var<Scalar> h = input_norm(input_proj(x), training);
  if (cfg_.inner_relu) h = relu(h);
  std::vector<Var<Scalar>> outs;
  Index offset = 0;
  for (auto &b : branches) {
    outs.push_back(b(narrow(h, 1, offset, b.width), training));
    offset += b.width;
  }
  return outs.size() == 1 ? outs.front() : concat(outs, 1);
}

template <typename Scalar>
Var<Scalar> DgTcn<Scalar>::operator()(const Var<Scalar> &x, bool training) {
  if (cfg_.mode == TemporalMode::vanilla) return vanilla_norm(vanilla(x), training);
  if (cfg_.fusion == FusionMode::off) return output_norm(output_proj(branches_forward(x, training)), training);

  // The skeleton feature rides along as an extra joint column, so it shares
  // every temporal weight with the joints.
  const Var<Scalar> z = branches_forward(concat<Scalar>({x, mean(x, 3)}, 3), training);
  const Var<Scalar> joint_part = narrow(z, 3, 0, joints_);
  const Var<Scalar> skeleton = narrow(z, 3, joints_, 1);
  Var<Scalar> fused;
  switch (cfg_.fusion) {
  case FusionMode::djsf:
    fused = joint_skeleton_fuse(joint_part, skeleton, gamma.var());
    break;
  case FusionMode::sum:
    fused = joint_skeleton_fuse(joint_part, skeleton, Var<Scalar>(fixed_gamma));
    break;
  case FusionMode::concat:
    fused = concat<Scalar>({joint_part, expand(skeleton, 3, joints_)}, 1);
    break;
  case FusionMode::off:
    break;
  }
  return output_norm(output_proj(fused), training);
}

template <typename Scalar>
void DgTcn<Scalar>::collect(ParamSink<Scalar> &sink, const std::string &prefix) {
  if (cfg_.mode == TemporalMode::vanilla) {
    vanilla.collect(sink, prefix + ".conv");
    vanilla_norm.collect(sink, prefix + ".norm");
    return;
  }
  input_proj.collect(sink, prefix + ".input_proj");
  input_norm.collect(sink, prefix + ".input_norm");
  for (std::size_t i = 0; i < branches.size(); ++i) {
    auto &b = branches[i];
    if (b.spec.kind == BranchKind::max_pool) continue;
    const std::string name = prefix + ".branch" + std::to_string(i);
    b.conv.collect(sink, name + ".conv");
    b.norm.collect(sink, name + ".norm");
  }
  sink.add(prefix + ".gamma", gamma);
  output_proj.collect(sink, prefix + ".output_proj");
  output_norm.collect(sink, prefix + ".output_norm");
}

template struct TemporalBranch<float>;
template struct TemporalBranch<double>;
template class DgTcn<float>;
template class DgTcn<double>;

} // namespace dgstgcn
