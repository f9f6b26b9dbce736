#include "dgstgcn/ops.hpp"
#include "dgstgcn/skeleton.hpp"
#include "dgstgcn/verify/checks.hpp"
#include "dgstgcn/verify/oracles.hpp"
#include "support.hpp"

namespace dgstgcn::verify {

namespace {

using V64 = Var<double>;

ComponentMask random_mask(std::mt19937_64 &rng) {
  const Index bits = uniform_int(rng, 1, 7);
  return {(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0};
}

void primitive_oracles(CheckList &out, std::mt19937_64 &rng) {
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const Index n = uniform_int(rng, 1, 2), cin = uniform_int(rng, 1, 4), cout = uniform_int(rng, 1, 4);
    const Index t = uniform_int(rng, 1, 9), v = uniform_int(rng, 1, 3);
    const Index k = 2 * uniform_int(rng, 0, 4) + 1, d = uniform_int(rng, 1, 3), s = uniform_int(rng, 1, 2);
    const T64 x = randn({n, cin, t, v}, rng), w = randn({cout, cin}, rng), b = randn({cout}, rng);
    const T64 wk = randn({cout, cin, k}, rng);
    worst = std::max(worst, max_rel_diff(pointwise_conv(V64(x), V64(w), V64(b)).value(), pointwise_conv_oracle(x, w, b)));
    worst = std::max(worst, max_rel_diff(temporal_conv(V64(x), V64(wk), V64(b), d, s).value(),
                                         temporal_conv_oracle(x, wk, b, d, s)));
    worst = std::max(worst, max_rel_diff(temporal_max_pool(V64(x), k, s).value(), max_pool_oracle(x, k, s)));
    worst = std::max(worst, max_rel_diff(softmax(V64(x), 2).value(), softmax_oracle(x, 2)));
  }
  out.add("primitive oracles", worst < 1e-10, "max rel diff " + fmt(worst));

  double fuse = 0;
  for (int i = 0; i < 10; ++i) {
    const T64 f = randn({uniform_int(rng, 1, 3), uniform_int(rng, 1, 4), 3, uniform_int(rng, 1, 4)}, rng);
    const T64 a = randn({f.dim(1), 3, 3}, rng);
    fuse = std::max(fuse, max_rel_diff(spatial_fuse_oracle(f, a), spatial_fuse_oracle_permuted(f, a)));
  }
  out.add("spatial fuse loop order", fuse < 1e-12, "max rel diff " + fmt(fuse));
}

} // namespace

CheckList oracle_equivalence(int spatial_instances, int temporal_instances) {
  CheckList out;
  std::mt19937_64 rng(31);
  primitive_oracles(out, rng);

  double worst = 0;
  std::string worst_case;
  for (int i = 0; i < spatial_instances; ++i) {
    const Index v = uniform_int(rng, 2, 5), t = uniform_int(rng, 1, 4), n = uniform_int(rng, 1, 2);
    const Index cin = uniform_int(rng, 1, 6);
    SpatialConfig sc;
    std::vector<Bone> bones;
    const int mode = i % 10;
    if (mode == 8 || mode == 9) {
      sc.mode = mode == 8 ? SpatialMode::fixed_topology : SpatialMode::refined_topology;
      sc.mask = {true, false, false};
      sc.groups = uniform_int(rng, 0, 1) ? 3 : 1;
      bones = tree_bones(v);
    } else {
      sc.mask = random_mask(rng);
      sc.groups = uniform_int(rng, 1, 3);
    }
    const Index cout = sc.groups * uniform_int(rng, 1, 3) + uniform_int(rng, 0, sc.groups - 1);
    DgGcn<double> g(cin, cout, v, sc, bones, {}, rng);
    ParamSink<double> sink;
    g.collect(sink, "m");
    randomize_state(sink, rng);
    const T64 x = randn({n, cin, t, v}, rng);
    const double e = max_rel_diff(g(V64(x), false).value(), dg_gcn_oracle(g, x));
    if (e >= worst) {
      worst = e;
      worst_case = to_string(sc.mode) + " " + sc.mask.to_string() + " K=" + std::to_string(sc.groups);
    }
  }
  out.add("spatial module vs loop oracle (" + std::to_string(spatial_instances) + " instances)",
          worst < kSpatialOracleTol, "max rel diff " + fmt(worst) + " at " + worst_case);

  const FusionMode fusions[] = {FusionMode::djsf, FusionMode::djsf, FusionMode::concat, FusionMode::sum, FusionMode::off};
  double fusion_worst = 0;
  std::string fusion_case;
  for (int i = 0; i < temporal_instances; ++i) {
    TemporalConfig tc;
    tc.fusion = fusions[i % 5];
    if (i % 10 == 9) {
      tc.mode = TemporalMode::vanilla;
      tc.fusion = FusionMode::off;
      tc.vanilla_kernel = 2 * uniform_int(rng, 0, 4) + 1;
    }
    tc.inner_relu = i % 7 != 3;
    const Index c = uniform_int(rng, 6, 14), v = uniform_int(rng, 1, 5), t = uniform_int(rng, 2, 9);
    const Index stride = uniform_int(rng, 1, 2), n = uniform_int(rng, 1, 2);
    DgTcn<double> module(c, stride, v, tc, {}, rng);
    ParamSink<double> sink;
    module.collect(sink, "m");
    randomize_state(sink, rng);
    const T64 x = randn({n, c, t, v}, rng);
    const double e = max_rel_diff(module(V64(x), false).value(), dg_tcn_oracle(module, x));
    if (e >= fusion_worst) {
      fusion_worst = e;
      fusion_case = to_string(tc.mode) + "/" + to_string(tc.fusion);
    }
  }
  out.add("temporal module vs two-pass oracle (" + std::to_string(temporal_instances) + " instances)",
          fusion_worst < kFusionOracleTol, "max rel diff " + fmt(fusion_worst) + " at " + fusion_case);

  // With an identity input projection, zeroing every input slice but one
  // reproduces that branch's isolated output in its channels.
  {
    TemporalConfig tc;
    tc.fusion = FusionMode::off;
    tc.inner_relu = false;
    const Index c = 12, t = 6, v = 3;
    DgTcn<double> module(c, 1, v, tc, {}, rng);
    ParamSink<double> sink;
    module.collect(sink, "m");
    randomize_state(sink, rng);
    module.input_proj.weight.value() = Tensor<double>({c, c});
    for (Index i = 0; i < c; ++i) module.input_proj.weight.value()(i, i) = 1.0;
    module.input_proj.bias.value().set_zero();
    module.input_norm.scale.value() = Tensor<double>({c}, 1.0);
    module.input_norm.shift.value().set_zero();
    module.input_norm.running_mean.set_zero();
    module.input_norm.running_var = Tensor<double>({c}, 1.0 - module.input_norm.eps);
    Index offset = 0;
    double branch_worst = 0;
    for (const auto &branch : module.branches) {
      T64 x = randn({1, c, t, v}, rng);
      for (Index ch = 0; ch < c; ++ch)
        if (ch < offset || ch >= offset + branch.width)
          for (Index l = 0; l < t; ++l)
            for (Index j = 0; j < v; ++j) x(0, ch, l, j) = 0;
      const T64 all = module.branches_forward(V64(x), false).value();
      branch_worst = std::max(branch_worst, max_rel_diff(channel_slice(all, offset, branch.width),
                                                         branch_oracle(branch, channel_slice(x, offset, branch.width))));
      offset += branch.width;
    }
    out.add("branch decomposition", branch_worst < kFusionOracleTol, "max rel diff " + fmt(branch_worst));
  }
  return out;
}

} // namespace dgstgcn::verify
