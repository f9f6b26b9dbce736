#include "dgstgcn/verify/oracles.hpp"

#include <cmath>
#include <limits>

namespace dgstgcn::verify {

namespace {

// [N, C, rest] view of a rank >= 2 tensor.
struct Nc {
  Index n, c, rest;
};
Nc nc_dims(const T64 &x) {
  const Index n = x.dim(0), c = x.dim(1);
  return {n, c, x.size() / std::max<Index>(n * c, 1)};
}

T64 concat_channels(const std::vector<T64> &parts) {
  const Index n = parts.front().dim(0), t = parts.front().dim(2), v = parts.front().dim(3);
  Index total = 0;
  for (const auto &p : parts) total += p.dim(1);
  T64 out({n, total, t, v});
  for (Index i = 0; i < n; ++i) {
    Index offset = 0;
    for (const auto &p : parts) {
      for (Index c = 0; c < p.dim(1); ++c)
        for (Index l = 0; l < t; ++l)
          for (Index j = 0; j < v; ++j) out(i, offset + c, l, j) = p(i, c, l, j);
      offset += p.dim(1);
    }
  }
  return out;
}

const T64 &value_or_empty(const Parameter<double> &p) {
  static const T64 empty;
  return p.defined() ? p.value() : empty;
}

T64 norm_oracle(const BatchNorm<double> &bn, const T64 &x) {
  return batch_norm_oracle(x, bn.scale.value(), bn.shift.value(), bn.running_mean, bn.running_var, bn.eps);
}

} // namespace

T64 channel_slice(const T64 &x, Index start, Index length) {
  const Index n = x.dim(0), t = x.dim(2), v = x.dim(3);
  T64 out({n, length, t, v});
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < length; ++c)
      for (Index l = 0; l < t; ++l)
        for (Index j = 0; j < v; ++j) out(i, c, l, j) = x(i, start + c, l, j);
  return out;
}

T64 pointwise_conv_oracle(const T64 &x, const T64 &w, const T64 &b) {
  const auto [n, cin, rest] = nc_dims(x);
  const Index cout = w.dim(0);
  Shape shape = x.shape();
  shape[1] = cout;
  T64 out(shape);
  for (Index i = 0; i < n; ++i)
    for (Index o = 0; o < cout; ++o)
      for (Index r = 0; r < rest; ++r) {
        double s = b.size() ? b[o] : 0.0;
        for (Index c = 0; c < cin; ++c) s += w(o, c) * x[(i * cin + c) * rest + r];
        out[(i * cout + o) * rest + r] = s;
      }
  return out;
}

T64 temporal_conv_oracle(const T64 &x, const T64 &w, const T64 &b, Index dilation, Index stride) {
  const Index n = x.dim(0), cin = x.dim(1), t = x.dim(2), v = x.dim(3);
  const Index cout = w.dim(0), k = w.dim(2);
  const Index pad = dilation * (k - 1) / 2;
  const Index tout = (t + stride - 1) / stride;
  T64 out({n, cout, tout, v});
  for (Index i = 0; i < n; ++i)
    for (Index o = 0; o < cout; ++o)
      for (Index l = 0; l < tout; ++l)
        for (Index j = 0; j < v; ++j) {
          double s = b.size() ? b[o] : 0.0;
          for (Index c = 0; c < cin; ++c)
            for (Index q = 0; q < k; ++q) {
              const Index src = l * stride - pad + q * dilation;
              if (src >= 0 && src < t) s += w(o, c, q) * x(i, c, src, j);
            }
          out(i, o, l, j) = s;
        }
  return out;
}

T64 max_pool_oracle(const T64 &x, Index kernel, Index stride) {
  const Index n = x.dim(0), c = x.dim(1), t = x.dim(2), v = x.dim(3);
  const Index pad = (kernel - 1) / 2;
  const Index tout = (t + stride - 1) / stride;
  T64 out({n, c, tout, v});
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch)
      for (Index l = 0; l < tout; ++l)
        for (Index j = 0; j < v; ++j) {
          double best = -std::numeric_limits<double>::infinity();
          for (Index q = 0; q < kernel; ++q) {
            const Index src = l * stride - pad + q;
            if (src >= 0 && src < t) best = std::max(best, x(i, ch, src, j));
          }
          out(i, ch, l, j) = best;
        }
  return out;
}

T64 batch_norm_oracle(const T64 &x, const T64 &scale, const T64 &shift, const T64 &mean, const T64 &var, double eps) {
  const auto [n, c, rest] = nc_dims(x);
  T64 out(x.shape());
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch)
      for (Index r = 0; r < rest; ++r) {
        const Index at = (i * c + ch) * rest + r;
        out[at] = scale[ch] * (x[at] - mean[ch]) / std::sqrt(var[ch] + eps) + shift[ch];
      }
  return out;
}

T64 relu_oracle(const T64 &x) {
  T64 out(x.shape());
  for (Index i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : 0.0;
  return out;
}

T64 softmax_oracle(const T64 &x, Index axis) {
  Index outer = 1, inner = 1;
  const Index extent = x.dim(axis);
  for (Index a = 0; a < axis; ++a) outer *= x.dim(a);
  for (Index a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
  T64 out(x.shape());
  for (Index o = 0; o < outer; ++o)
    for (Index r = 0; r < inner; ++r) {
      double total = 0;
      for (Index e = 0; e < extent; ++e) total += std::exp(x[(o * extent + e) * inner + r]);
      for (Index e = 0; e < extent; ++e) {
        const Index at = (o * extent + e) * inner + r;
        out[at] = std::exp(x[at]) / total;
      }
    }
  return out;
}

T64 spatial_fuse_oracle(const T64 &features, const T64 &coefficients) {
  const Index t = features.dim(0), k = features.dim(1), v = features.dim(2), c = features.dim(3);
  T64 out({t, v, c});
  for (Index l = 0; l < t; ++l)
    for (Index i = 0; i < v; ++i)
      for (Index j = 0; j < c; ++j) {
        double s = 0;
        for (Index g = 0; g < k; ++g)
          for (Index u = 0; u < v; ++u) s += coefficients(g, u, i) * features(l, g, u, j);
        out(l, i, j) = s;
      }
  return out;
}

T64 spatial_fuse_oracle_permuted(const T64 &features, const T64 &coefficients) {
  const Index t = features.dim(0), k = features.dim(1), v = features.dim(2), c = features.dim(3);
  T64 out({t, v, c});
  for (Index g = k - 1; g >= 0; --g)
    for (Index u = v - 1; u >= 0; --u)
      for (Index j = 0; j < c; ++j)
        for (Index l = 0; l < t; ++l)
          for (Index i = 0; i < v; ++i) out(l, i, j) += coefficients(g, u, i) * features(l, g, u, j);
  return out;
}

DynamicOracle dynamic_terms_oracle(const T64 &x, const CoefficientParams<double> &coef, const ComponentMask &mask) {
  DynamicOracle out;
  if (!mask.dynamic()) return out;
  const Index n = x.dim(0), cin = x.dim(1), t = x.dim(2), v = x.dim(3);
  const Index k = coef.groups, cg = coef.width;
  T64 pooled({n, cin, 1, v});
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < cin; ++c)
      for (Index j = 0; j < v; ++j) {
        double s = 0;
        for (Index l = 0; l < t; ++l) s += x(i, c, l, j);
        pooled(i, c, 0, j) = s / static_cast<double>(t);
      }
  const T64 a = pointwise_conv_oracle(pooled, coef.encoder_a.weight.value(), value_or_empty(coef.encoder_a.bias));
  const T64 b = pointwise_conv_oracle(pooled, coef.encoder_b.weight.value(), value_or_empty(coef.encoder_b.bias));
  if (mask.da) {
    T64 gram({n, k, v, v});
    for (Index i = 0; i < n; ++i)
      for (Index g = 0; g < k; ++g)
        for (Index p = 0; p < v; ++p)
          for (Index q = 0; q < v; ++q) {
            double s = 0;
            for (Index c = 0; c < cg; ++c) s += a(i, g * cg + c, 0, p) * b(i, g * cg + c, 0, q);
            gram(i, g, p, q) = s;
          }
    out.agnostic = softmax_oracle(gram, 2);
  }
  if (mask.ca) {
    out.specific = T64({n, k, cg, v, v});
    for (Index i = 0; i < n; ++i)
      for (Index g = 0; g < k; ++g)
        for (Index c = 0; c < cg; ++c)
          for (Index p = 0; p < v; ++p)
            for (Index q = 0; q < v; ++q)
              out.specific(i, g, c, p, q) = std::tanh(a(i, g * cg + c, 0, p) - b(i, g * cg + c, 0, q));
  }
  return out;
}

T64 dg_gcn_oracle(const DgGcn<double> &module, const T64 &x) {
  const SpatialConfig &cfg = module.config();
  const Index n = x.dim(0), t = x.dim(2), v = x.dim(3);
  const Index k = module.groups(), cg = module.width();
  const T64 &wout = module.output_proj.weight.value();
  const Index cout = wout.dim(0);
  const T64 h = norm_oracle(module.input_norm, pointwise_conv_oracle(x, module.input_proj.weight.value(),
                                                                     value_or_empty(module.input_proj.bias)));

  const bool from_scratch = cfg.mode == SpatialMode::from_scratch;
  const ComponentMask mask = from_scratch ? cfg.mask : ComponentMask{true, false, false};
  const DynamicOracle dyn = from_scratch ? dynamic_terms_oracle(x, module.coef, mask) : DynamicOracle{};
  auto coefficient = [&](Index i, Index g, Index c, Index p, Index q) {
    double s = 0;
    if (!from_scratch) {
      s = module.topology(g, p, q);
      if (module.refinement.defined()) s += module.refinement.value()(g, p, q);
      return s;
    }
    if (mask.pa) s += module.coef.static_term.value()(g, p, q);
    if (mask.da) s += module.coef.alpha.value()[g] * dyn.agnostic(i, g, p, q);
    if (mask.ca) s += module.coef.beta.value()[g] * dyn.specific(i, g, c, p, q);
    return s;
  };

  T64 y({n, cout, t, v});
  for (Index i = 0; i < n; ++i) {
    if (!mask.ca) {
      T64 features({t, k, v, cout});
      for (Index l = 0; l < t; ++l)
        for (Index g = 0; g < k; ++g)
          for (Index u = 0; u < v; ++u)
            for (Index o = 0; o < cout; ++o) {
              double s = 0;
              for (Index c = 0; c < cg; ++c) s += wout(o, g * cg + c) * h(i, g * cg + c, l, u);
              features(l, g, u, o) = s;
            }
      T64 a({k, v, v});
      for (Index g = 0; g < k; ++g)
        for (Index p = 0; p < v; ++p)
          for (Index q = 0; q < v; ++q) a(g, p, q) = coefficient(i, g, 0, p, q);
      const T64 fused = spatial_fuse_oracle(features, a);
      for (Index o = 0; o < cout; ++o)
        for (Index l = 0; l < t; ++l)
          for (Index q = 0; q < v; ++q) y(i, o, l, q) = fused(l, q, o);
    } else {
      T64 mixed({k * cg, t, v});
      for (Index g = 0; g < k; ++g)
        for (Index c = 0; c < cg; ++c)
          for (Index l = 0; l < t; ++l)
            for (Index q = 0; q < v; ++q) {
              double s = 0;
              for (Index u = 0; u < v; ++u) s += h(i, g * cg + c, l, u) * coefficient(i, g, c, u, q);
              mixed(g * cg + c, l, q) = s;
            }
      for (Index o = 0; o < cout; ++o)
        for (Index l = 0; l < t; ++l)
          for (Index q = 0; q < v; ++q) {
            double s = 0;
            for (Index ch = 0; ch < k * cg; ++ch) s += wout(o, ch) * mixed(ch, l, q);
            y(i, o, l, q) = s;
          }
    }
    if (module.output_proj.bias.defined())
      for (Index o = 0; o < cout; ++o)
        for (Index l = 0; l < t; ++l)
          for (Index q = 0; q < v; ++q) y(i, o, l, q) += module.output_proj.bias.value()[o];
  }
  return norm_oracle(module.output_norm, y);
}

T64 branch_oracle(const TemporalBranch<double> &branch, const T64 &slice) {
  if (branch.spec.kind == BranchKind::max_pool) return max_pool_oracle(slice, branch.spec.kernel, branch.stride);
  const T64 z = temporal_conv_oracle(slice, branch.conv.weight.value(), value_or_empty(branch.conv.bias),
                                     branch.conv.dilation, branch.conv.stride);
  return norm_oracle(branch.norm, z);
}

T64 branches_oracle(const DgTcn<double> &module, const T64 &x) {
  T64 h = norm_oracle(module.input_norm, pointwise_conv_oracle(x, module.input_proj.weight.value(),
                                                               value_or_empty(module.input_proj.bias)));
  if (module.config().inner_relu) h = relu_oracle(h);
  std::vector<T64> outs;
  Index offset = 0;
  for (const auto &b : module.branches) {
    outs.push_back(branch_oracle(b, channel_slice(h, offset, b.width)));
    offset += b.width;
  }
  return concat_channels(outs);
}

T64 dg_tcn_oracle(const DgTcn<double> &module, const T64 &x) {
  const TemporalConfig &cfg = module.config();
  if (cfg.mode == TemporalMode::vanilla) {
    const T64 z = temporal_conv_oracle(x, module.vanilla.weight.value(), value_or_empty(module.vanilla.bias),
                                       module.vanilla.dilation, module.vanilla.stride);
    return norm_oracle(module.vanilla_norm, z);
  }
  auto project = [&](const T64 &z) {
    return norm_oracle(module.output_norm, pointwise_conv_oracle(z, module.output_proj.weight.value(),
                                                                 value_or_empty(module.output_proj.bias)));
  };
  if (cfg.fusion == FusionMode::off) return project(branches_oracle(module, x));

  const Index n = x.dim(0), c = x.dim(1), t = x.dim(2), v = x.dim(3);
  T64 skeleton({n, c, t, 1});
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch)
      for (Index l = 0; l < t; ++l) {
        double s = 0;
        for (Index j = 0; j < v; ++j) s += x(i, ch, l, j);
        skeleton(i, ch, l, 0) = s / static_cast<double>(v);
      }
  const T64 jp = branches_oracle(module, x);
  const T64 sp = branches_oracle(module, skeleton);
  const Index tout = jp.dim(2);
  if (cfg.fusion == FusionMode::concat) {
    T64 spread({n, c, tout, v});
    for (Index i = 0; i < n; ++i)
      for (Index ch = 0; ch < c; ++ch)
        for (Index l = 0; l < tout; ++l)
          for (Index j = 0; j < v; ++j) spread(i, ch, l, j) = sp(i, ch, l, 0);
    return project(concat_channels({jp, spread}));
  }
  const T64 &gamma = cfg.fusion == FusionMode::djsf ? module.gamma.value() : module.fixed_gamma;
  T64 fused({n, c, tout, v});
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch)
      for (Index l = 0; l < tout; ++l)
        for (Index j = 0; j < v; ++j) fused(i, ch, l, j) = jp(i, ch, l, j) + gamma[j] * sp(i, ch, l, 0);
  return project(fused);
}

} // namespace dgstgcn::verify
