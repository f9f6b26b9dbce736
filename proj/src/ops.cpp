#include "dgstgcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dgstgcn {

namespace {

thread_local std::uint64_t mac_count = 0;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Gradient buffer of the i-th parent, or nullptr when it needs none.
template <typename Scalar>
Tensor<Scalar> *parent_grad(Node<Scalar> &node, std::size_t i) {
  if (i >= node.parents.size() || !node.parents[i] || !node.parents[i]->requires_grad) return nullptr;
  return &node.parents[i]->grad_buffer();
}

template <typename Scalar>
const Tensor<Scalar> &parent_value(const Node<Scalar> &node, std::size_t i) {
  return node.parents[i]->value;
}

void require(bool ok, const std::string &msg) {
  if (!ok) throw DimensionError(msg);
}

std::string shapes(const char *op, const Shape &a, const Shape &b) {
  return std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b);
}

template <typename Scalar>
std::vector<Var<Scalar>> with_optional(std::vector<Var<Scalar>> req, const Var<Scalar> &opt) {
  if (opt.defined()) req.push_back(opt);
  return req;
}

} // namespace

std::uint64_t MacCounter::value() { return mac_count; }
void MacCounter::reset() { mac_count = 0; }
void MacCounter::add(std::uint64_t macs) { mac_count += macs; }

// ---------------------------------------------------------------------------
// Contractions

template <typename Scalar>
Var<Scalar> pointwise_conv(const Var<Scalar> &x, const Var<Scalar> &w, const Var<Scalar> &b) {
  const Shape &xs = x.shape();
  require(xs.size() >= 2, "pointwise_conv: input needs rank >= 2, got " + shape_string(xs));
  require(w.shape().size() == 2 && w.dim(1) == xs[1], shapes("pointwise_conv", xs, w.shape()));
  const Index n_batch = xs[0], c_in = xs[1], c_out = w.dim(0);
  const Index spatial = c_in == 0 ? 0 : x.value().size() / (n_batch * c_in);
  if (b.defined()) require(b.shape() == Shape{c_out}, shapes("pointwise_conv bias", w.shape(), b.shape()));

  Shape out_shape = xs;
  out_shape[1] = c_out;
  auto y = Tensor<Scalar>::uninitialized(out_shape);
  const auto weight = w.value().matrix(c_out, c_in);
  if (spatial == 1) {
    auto out = y.matrix(n_batch, c_out);
    out.noalias() = x.value().matrix(n_batch, c_in) * weight.transpose();
    if (b.defined()) out.rowwise() += b.value().data().transpose();
  } else {
    for (Index n = 0; n < n_batch; ++n) {
      ConstMatrixMap<Scalar> xn(x.value().ptr() + n * c_in * spatial, c_in, spatial);
      MatrixMap<Scalar> yn(y.ptr() + n * c_out * spatial, c_out, spatial);
      yn.noalias() = weight * xn;
      if (b.defined()) yn.colwise() += b.value().data();
    }
  }
  MacCounter::add(static_cast<std::uint64_t>(n_batch * c_out * c_in * spatial));

  return make_result<Scalar>(
      std::move(y), with_optional<Scalar>({x, w}, b), [n_batch, c_in, c_out, spatial](Node<Scalar> &self) {
        const Tensor<Scalar> &xv = parent_value(self, 0);
        const auto weight = parent_value(self, 1).matrix(c_out, c_in);
        Tensor<Scalar> *gx = parent_grad(self, 0);
        Tensor<Scalar> *gw = parent_grad(self, 1);
        Tensor<Scalar> *gb = parent_grad(self, 2);
        if (spatial == 1) {
          const auto dy = self.grad.matrix(n_batch, c_out);
          if (gx) gx->matrix(n_batch, c_in).noalias() += dy * weight;
          if (gw) gw->matrix(c_out, c_in).noalias() += dy.transpose() * xv.matrix(n_batch, c_in);
          if (gb) gb->data() += dy.colwise().sum().transpose();
          return;
        }
        for (Index n = 0; n < n_batch; ++n) {
          ConstMatrixMap<Scalar> dy(self.grad.ptr() + n * c_out * spatial, c_out, spatial);
          if (gx) MatrixMap<Scalar>(gx->ptr() + n * c_in * spatial, c_in, spatial).noalias() += weight.transpose() * dy;
          if (gw)
            gw->matrix(c_out, c_in).noalias() +=
                dy * ConstMatrixMap<Scalar>(xv.ptr() + n * c_in * spatial, c_in, spatial).transpose();
          if (gb) gb->data() += dy.rowwise().sum();
        }
      });
}

namespace {

struct TapRange {
  Index lo, hi; // inclusive output-frame range for which the tap reads a real frame
  Index offset; // input frame = out_frame * stride + offset
};

TapRange tap_range(Index tap, Index dilation, Index pad, Index stride, Index frames, Index out_frames) {
  const Index offset = tap * dilation - pad;
  Index lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  Index hi = frames - 1 - offset < 0 ? -1 : (frames - 1 - offset) / stride;
  hi = std::min(hi, out_frames - 1);
  return {lo, hi, offset};
}

} // namespace

template <typename Scalar>
Var<Scalar> temporal_conv(const Var<Scalar> &x, const Var<Scalar> &w, const Var<Scalar> &b, Index dilation,
                          Index stride) {
  const Shape &xs = x.shape();
  require(xs.size() == 4, "temporal_conv: input must be [N,C,T,V], got " + shape_string(xs));
  require(w.shape().size() == 3 && w.dim(1) == xs[1], shapes("temporal_conv", xs, w.shape()));
  const Index kernel = w.dim(2);
  if (kernel % 2 == 0) throw ConfigError("temporal_conv: kernel size must be odd, got " + std::to_string(kernel));
  if (dilation < 1) throw ConfigError("temporal_conv: dilation must be >= 1");
  if (stride < 1) throw ConfigError("temporal_conv: stride must be >= 1");
  const Index n_batch = xs[0], c_in = xs[1], frames = xs[2], joints = xs[3], c_out = w.dim(0);
  if (b.defined()) require(b.shape() == Shape{c_out}, shapes("temporal_conv bias", w.shape(), b.shape()));
  const Index pad = dilation * (kernel - 1) / 2;
  const Index out_frames = frames == 0 ? 0 : (frames - 1) / stride + 1;

  std::vector<RowMatrix<Scalar>> taps(static_cast<std::size_t>(kernel));
  for (Index j = 0; j < kernel; ++j) {
    taps[j].resize(c_out, c_in);
    for (Index o = 0; o < c_out; ++o)
      for (Index i = 0; i < c_in; ++i) taps[j](o, i) = w.value()(o, i, j);
  }

  Tensor<Scalar> y({n_batch, c_out, out_frames, joints});
  RowMatrix<Scalar> gathered;
  for (Index n = 0; n < n_batch; ++n) {
    ConstMatrixMap<Scalar> xn(x.value().ptr() + n * c_in * frames * joints, c_in, frames * joints);
    MatrixMap<Scalar> yn(y.ptr() + n * c_out * out_frames * joints, c_out, out_frames * joints);
    for (Index j = 0; j < kernel; ++j) {
      const TapRange r = tap_range(j, dilation, pad, stride, frames, out_frames);
      if (r.lo > r.hi) continue;
      const Index len = r.hi - r.lo + 1;
      if (stride == 1) {
        yn.middleCols(r.lo * joints, len * joints).noalias() +=
            taps[j] * xn.middleCols((r.lo + r.offset) * joints, len * joints);
      } else {
        gathered.resize(c_in, len * joints);
        for (Index q = 0; q < len; ++q)
          gathered.middleCols(q * joints, joints) = xn.middleCols(((r.lo + q) * stride + r.offset) * joints, joints);
        yn.middleCols(r.lo * joints, len * joints).noalias() += taps[j] * gathered;
      }
    }
    if (b.defined()) yn.colwise() += b.value().data();
  }
  MacCounter::add(static_cast<std::uint64_t>(n_batch * c_out * c_in * kernel * out_frames * joints));

  return make_result<Scalar>(
      std::move(y), with_optional<Scalar>({x, w}, b),
      [=, taps = std::move(taps)](Node<Scalar> &self) {
        const Tensor<Scalar> &xv = parent_value(self, 0);
        Tensor<Scalar> *gx = parent_grad(self, 0);
        Tensor<Scalar> *gw = parent_grad(self, 1);
        Tensor<Scalar> *gb = parent_grad(self, 2);
        RowMatrix<Scalar> gathered, dtap, scatter;
        for (Index n = 0; n < n_batch; ++n) {
          ConstMatrixMap<Scalar> xn(xv.ptr() + n * c_in * frames * joints, c_in, frames * joints);
          ConstMatrixMap<Scalar> dy(self.grad.ptr() + n * c_out * out_frames * joints, c_out, out_frames * joints);
          if (gb) gb->data() += dy.rowwise().sum();
          for (Index j = 0; j < kernel; ++j) {
            const TapRange r = tap_range(j, dilation, pad, stride, frames, out_frames);
            if (r.lo > r.hi) continue;
            const Index len = r.hi - r.lo + 1;
            const auto dy_cols = dy.middleCols(r.lo * joints, len * joints);
            if (stride == 1) {
              const auto x_cols = xn.middleCols((r.lo + r.offset) * joints, len * joints);
              if (gx) {
                MatrixMap<Scalar> dx(gx->ptr() + n * c_in * frames * joints, c_in, frames * joints);
                dx.middleCols((r.lo + r.offset) * joints, len * joints).noalias() += taps[j].transpose() * dy_cols;
              }
              if (gw) dtap.noalias() = dy_cols * x_cols.transpose();
            } else {
              if (gw) {
                gathered.resize(c_in, len * joints);
                for (Index q = 0; q < len; ++q)
                  gathered.middleCols(q * joints, joints) =
                      xn.middleCols(((r.lo + q) * stride + r.offset) * joints, joints);
                dtap.noalias() = dy_cols * gathered.transpose();
              }
              if (gx) {
                scatter.noalias() = taps[j].transpose() * dy_cols;
                MatrixMap<Scalar> dx(gx->ptr() + n * c_in * frames * joints, c_in, frames * joints);
                for (Index q = 0; q < len; ++q)
                  dx.middleCols(((r.lo + q) * stride + r.offset) * joints, joints) += scatter.middleCols(q * joints, joints);
              }
            }
            if (gw)
              for (Index o = 0; o < c_out; ++o)
                for (Index i = 0; i < c_in; ++i) (*gw)(o, i, j) += dtap(o, i);
          }
        }
      });
}

template <typename Scalar>
Var<Scalar> temporal_max_pool(const Var<Scalar> &x, Index kernel, Index stride) {
  const Shape &xs = x.shape();
  require(xs.size() == 4, "temporal_max_pool: input must be [N,C,T,V], got " + shape_string(xs));
  if (kernel % 2 == 0 || kernel < 1) throw ConfigError("temporal_max_pool: kernel must be odd");
  if (stride < 1) throw ConfigError("temporal_max_pool: stride must be >= 1");
  const Index planes = xs[0] * xs[1], frames = xs[2], joints = xs[3];
  const Index pad = (kernel - 1) / 2;
  const Index out_frames = frames == 0 ? 0 : (frames - 1) / stride + 1;
  Tensor<Scalar> y({xs[0], xs[1], out_frames, joints});
  std::vector<Index> argmax(static_cast<std::size_t>(y.size()));
  const Scalar *in = x.value().ptr();
  for (Index p = 0; p < planes; ++p)
    for (Index t = 0; t < out_frames; ++t)
      for (Index v = 0; v < joints; ++v) {
        Index best = -1;
        Scalar best_val = -std::numeric_limits<Scalar>::infinity();
        for (Index j = 0; j < kernel; ++j) {
          const Index src = t * stride + j - pad;
          if (src < 0 || src >= frames) continue;
          const Index idx = (p * frames + src) * joints + v;
          if (best < 0 || in[idx] > best_val) {
            best = idx;
            best_val = in[idx];
          }
        }
        const Index out_idx = (p * out_frames + t) * joints + v;
        y[out_idx] = best_val;
        argmax[static_cast<std::size_t>(out_idx)] = best;
      }
  return make_result<Scalar>(std::move(y), {x}, [argmax = std::move(argmax)](Node<Scalar> &self) {
    Tensor<Scalar> *gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < argmax.size(); ++i) (*gx)[argmax[i]] += self.grad[static_cast<Index>(i)];
  });
}

// ---------------------------------------------------------------------------
// Pointwise and reductions

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar> &x, Index axis) {
  const AxisSplit s = split_at_axis(x.shape(), axis);
  auto y = Tensor<Scalar>::uninitialized(x.shape());
  const Scalar *in = x.value().ptr();
  Scalar *out = y.ptr();
  for (Index o = 0; o < s.outer; ++o)
    for (Index r = 0; r < s.inner; ++r) {
      const Index base = o * s.extent * s.inner + r;
      Scalar mx = -std::numeric_limits<Scalar>::infinity();
      for (Index i = 0; i < s.extent; ++i) mx = std::max(mx, in[base + i * s.inner]);
      Scalar total = 0;
      for (Index i = 0; i < s.extent; ++i) total += out[base + i * s.inner] = std::exp(in[base + i * s.inner] - mx);
      for (Index i = 0; i < s.extent; ++i) out[base + i * s.inner] /= total;
    }
  return make_result<Scalar>(std::move(y), {x}, [s](Node<Scalar> &self) {
    Tensor<Scalar> *gx = parent_grad(self, 0);
    if (!gx) return;
    const Scalar *yv = self.value.ptr();
    const Scalar *dy = self.grad.ptr();
    for (Index o = 0; o < s.outer; ++o)
      for (Index r = 0; r < s.inner; ++r) {
        const Index base = o * s.extent * s.inner + r;
        Scalar dot = 0;
        for (Index i = 0; i < s.extent; ++i) dot += dy[base + i * s.inner] * yv[base + i * s.inner];
        for (Index i = 0; i < s.extent; ++i)
          (*gx)[base + i * s.inner] += yv[base + i * s.inner] * (dy[base + i * s.inner] - dot);
      }
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar> &x) {
  Tensor<Scalar> y(x.shape(), x.value().data().cwiseMax(Scalar(0)));
  return make_result<Scalar>(std::move(y), {x}, [](Node<Scalar> &self) {
    Tensor<Scalar> *gx = parent_grad(self, 0);
    if (!gx) return;
    const auto &xv = parent_value(self, 0).data();
    gx->data().array() += (xv.array() > Scalar(0)).select(self.grad.data().array(), Scalar(0));
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar> &x) {
  Tensor<Scalar> y(x.shape(), Vec<Scalar>(x.value().data().array().tanh()));
  return make_result<Scalar>(std::move(y), {x}, [](Node<Scalar> &self) {
    Tensor<Scalar> *gx = parent_grad(self, 0);
    if (!gx) return;
    gx->data().array() += self.grad.data().array() * (Scalar(1) - self.value.data().array().square());
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar> &a, const Var<Scalar> &b) {
  require(a.shape() == b.shape(), shapes("add", a.shape(), b.shape()));
  Tensor<Scalar> y(a.shape(), Vec<Scalar>(a.value().data() + b.value().data()));
  return make_result<Scalar>(std::move(y), {a, b}, [](Node<Scalar> &self) {
    for (std::size_t i = 0; i < 2; ++i)
      if (Tensor<Scalar> *g = parent_grad(self, i)) g->data() += self.grad.data();
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar> &x, Index axis, bool keepdim) {
  if (axis < 0) axis += x.value().rank();
  const AxisSplit s = split_at_axis(x.shape(), axis);
  require(s.extent > 0, "mean: empty axis in " + shape_string(x.shape()));
  Shape out_shape = x.shape();
  if (keepdim)
    out_shape[static_cast<std::size_t>(axis)] = 1;
  else
    out_shape.erase(out_shape.begin() + axis);
  Tensor<Scalar> y(out_shape);
  const Scalar *in = x.value().ptr();
  const Scalar scale = Scalar(1) / static_cast<Scalar>(s.extent);
  for (Index o = 0; o < s.outer; ++o) {
    Eigen::Map<Vec<Scalar>> acc(y.ptr() + o * s.inner, s.inner);
    for (Index i = 0; i < s.extent; ++i)
      acc += Eigen::Map<const Vec<Scalar>>(in + (o * s.extent + i) * s.inner, s.inner);
    acc *= scale;
  }
  return make_result<Scalar>(std::move(y), {x}, [s, scale](Node<Scalar> &self) {
    Tensor<Scalar> *gx = parent_grad(self, 0);
    if (!gx) return;
    for (Index o = 0; o < s.outer; ++o) {
      Eigen::Map<const Vec<Scalar>> dy(self.grad.ptr() + o * s.inner, s.inner);
      for (Index i = 0; i < s.extent; ++i)
        Eigen::Map<Vec<Scalar>>(gx->ptr() + (o * s.extent + i) * s.inner, s.inner) += scale * dy;
    }
  });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar> &x, Shape shape) {
  Tensor<Scalar> y = x.value().reshaped(std::move(shape));
  return make_result<Scalar>(std::move(y), {x}, [](Node<Scalar> &self) {
    if (Tensor<Scalar> *gx = parent_grad(self, 0)) gx->data() += self.grad.data();
  });
}

template <typename Scalar>
Var<Scalar> narrow(const Var<Scalar> &x, Index axis, Index start, Index length) {
  if (axis < 0) axis += x.value().rank();
  const AxisSplit s = split_at_axis(x.shape(), axis);
  require(start >= 0 && length >= 0 && start + length <= s.extent,
          "narrow: range [" + std::to_string(start) + "," + std::to_string(start + length) + ") outside axis " +
              std::to_string(axis) + " of " + shape_string(x.shape()));
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = length;
  auto y = Tensor<Scalar>::uninitialized(out_shape);
  const Index block = length * s.inner;
  for (Index o = 0; o < s.outer; ++o)
    std::copy_n(x.value().ptr() + (o * s.extent + start) * s.inner, block, y.ptr() + o * block);
  return make_result<Scalar>(std::move(y), {x}, [s, start, block](Node<Scalar> &self) {
    Tensor<Scalar> *gx = parent_grad(self, 0);
    if (!gx) return;
    for (Index o = 0; o < s.outer; ++o)
      Eigen::Map<Vec<Scalar>>(gx->ptr() + (o * s.extent + start) * s.inner, block) +=
          Eigen::Map<const Vec<Scalar>>(self.grad.ptr() + o * block, block);
  });
}

template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>> &parts, Index axis) {
  require(!parts.empty(), "concat: no inputs");
  const Index rank = parts.front().value().rank();
  if (axis < 0) axis += rank;
  Shape out_shape = parts.front().shape();
  Index total = 0;
  std::vector<Index> extents;
  for (const auto &p : parts) {
    Shape s = p.shape();
    require(static_cast<Index>(s.size()) == rank, shapes("concat", out_shape, s));
    extents.push_back(s[static_cast<std::size_t>(axis)]);
    total += extents.back();
    s[static_cast<std::size_t>(axis)] = out_shape[static_cast<std::size_t>(axis)];
    require(s == out_shape, shapes("concat", out_shape, p.shape()));
  }
  out_shape[static_cast<std::size_t>(axis)] = total;
  const AxisSplit s = split_at_axis(out_shape, axis);
  auto y = Tensor<Scalar>::uninitialized(out_shape);
  Index start = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Index block = extents[k] * s.inner;
    for (Index o = 0; o < s.outer; ++o)
      std::copy_n(parts[k].value().ptr() + o * block, block, y.ptr() + (o * total + start) * s.inner);
    start += extents[k];
  }
  return make_result<Scalar>(std::move(y), parts, [s, total, extents](Node<Scalar> &self) {
    Index start = 0;
    for (std::size_t k = 0; k < extents.size(); ++k) {
      const Index block = extents[k] * s.inner;
      if (Tensor<Scalar> *g = parent_grad(self, k))
        for (Index o = 0; o < s.outer; ++o)
          Eigen::Map<Vec<Scalar>>(g->ptr() + o * block, block) +=
              Eigen::Map<const Vec<Scalar>>(self.grad.ptr() + (o * total + start) * s.inner, block);
      start += extents[k];
    }
  });
}

template <typename Scalar>
Var<Scalar> expand(const Var<Scalar> &x, Index axis, Index count) {
  if (axis < 0) axis += x.value().rank();
  const AxisSplit s = split_at_axis(x.shape(), axis);
  require(s.extent == 1, "expand: axis " + std::to_string(axis) + " of " + shape_string(x.shape()) + " is not 1");
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = count;
  auto y = Tensor<Scalar>::uninitialized(out_shape);
  for (Index o = 0; o < s.outer; ++o)
    for (Index i = 0; i < count; ++i)
      std::copy_n(x.value().ptr() + o * s.inner, s.inner, y.ptr() + (o * count + i) * s.inner);
  return make_result<Scalar>(std::move(y), {x}, [s, count](Node<Scalar> &self) {
    Tensor<Scalar> *gx = parent_grad(self, 0);
    if (!gx) return;
    for (Index o = 0; o < s.outer; ++o) {
      Eigen::Map<Vec<Scalar>> g(gx->ptr() + o * s.inner, s.inner);
      for (Index i = 0; i < count; ++i)
        g += Eigen::Map<const Vec<Scalar>>(self.grad.ptr() + (o * count + i) * s.inner, s.inner);
    }
  });
}

template <typename Scalar>
Var<Scalar> batch_norm(const Var<Scalar> &x, const Var<Scalar> &scale, const Var<Scalar> &shift,
                       Tensor<Scalar> &running_mean, Tensor<Scalar> &running_var, const BatchNormOptions &opts) {
  require(x.value().rank() >= 2, "batch_norm: input needs rank >= 2, got " + shape_string(x.shape()));
  const AxisSplit s = split_at_axis(x.shape(), 1);
  const Index channels = s.extent;
  const Shape cshape{channels};
  require(scale.shape() == cshape && shift.shape() == cshape && running_mean.shape() == cshape &&
              running_var.shape() == cshape,
          shapes("batch_norm", x.shape(), scale.shape()));
  const Index count = s.outer * s.inner;
  const Scalar eps = static_cast<Scalar>(opts.eps);

  Vec<Scalar> mu(channels), inv_std(channels);
  const Scalar *in = x.value().ptr();
  if (opts.training) {
    require(count > 0, "batch_norm: empty batch in training mode");
    for (Index c = 0; c < channels; ++c) {
      Scalar sum = 0;
      for (Index o = 0; o < s.outer; ++o)
        sum += Eigen::Map<const Vec<Scalar>>(in + (o * channels + c) * s.inner, s.inner).sum();
      const Scalar m = sum / static_cast<Scalar>(count);
      Scalar sq = 0;
      for (Index o = 0; o < s.outer; ++o)
        sq += (Eigen::Map<const Vec<Scalar>>(in + (o * channels + c) * s.inner, s.inner).array() - m).square().sum();
      const Scalar var = sq / static_cast<Scalar>(count);
      mu[c] = m;
      inv_std[c] = Scalar(1) / std::sqrt(var + eps);
      const Scalar mom = static_cast<Scalar>(opts.momentum);
      const Scalar unbiased = count > 1 ? var * static_cast<Scalar>(count) / static_cast<Scalar>(count - 1) : var;
      running_mean[c] = (Scalar(1) - mom) * running_mean[c] + mom * m;
      running_var[c] = (Scalar(1) - mom) * running_var[c] + mom * unbiased;
    }
  } else {
    mu = running_mean.data();
    inv_std = (running_var.data().array() + eps).rsqrt().matrix();
  }

  auto y = Tensor<Scalar>::uninitialized(x.shape());
  for (Index o = 0; o < s.outer; ++o)
    for (Index c = 0; c < channels; ++c) {
      const Index off = (o * channels + c) * s.inner;
      Eigen::Map<Vec<Scalar>>(y.ptr() + off, s.inner) =
          ((Eigen::Map<const Vec<Scalar>>(in + off, s.inner).array() - mu[c]) * (inv_std[c] * scale.value()[c]) +
           shift.value()[c])
              .matrix();
    }

  const bool training = opts.training;
  return make_result<Scalar>(
      std::move(y), {x, scale, shift}, [s, channels, count, mu, inv_std, training](Node<Scalar> &self) {
        const Scalar *in = parent_value(self, 0).ptr();
        const Tensor<Scalar> &gain = parent_value(self, 1);
        Tensor<Scalar> *gx = parent_grad(self, 0);
        Tensor<Scalar> *gscale = parent_grad(self, 1);
        Tensor<Scalar> *gshift = parent_grad(self, 2);
        const Scalar *dy = self.grad.ptr();
        for (Index c = 0; c < channels; ++c) {
          Scalar sum_dy = 0, sum_dy_xhat = 0;
          for (Index o = 0; o < s.outer; ++o) {
            const Index off = (o * channels + c) * s.inner;
            const auto d = Eigen::Map<const Vec<Scalar>>(dy + off, s.inner).array();
            const auto xhat = (Eigen::Map<const Vec<Scalar>>(in + off, s.inner).array() - mu[c]) * inv_std[c];
            sum_dy += d.sum();
            sum_dy_xhat += (d * xhat).sum();
          }
          if (gscale) (*gscale)[c] += sum_dy_xhat;
          if (gshift) (*gshift)[c] += sum_dy;
          if (!gx) continue;
          const Scalar g = gain[c] * inv_std[c];
          const Scalar mean_dy = sum_dy / static_cast<Scalar>(count);
          const Scalar mean_dy_xhat = sum_dy_xhat / static_cast<Scalar>(count);
          for (Index o = 0; o < s.outer; ++o) {
            const Index off = (o * channels + c) * s.inner;
            const auto d = Eigen::Map<const Vec<Scalar>>(dy + off, s.inner).array();
            auto dx = Eigen::Map<Vec<Scalar>>(gx->ptr() + off, s.inner).array();
            if (training) {
              const auto xhat = (Eigen::Map<const Vec<Scalar>>(in + off, s.inner).array() - mu[c]) * inv_std[c];
              dx += g * (d - mean_dy - xhat * mean_dy_xhat);
            } else {
              dx += g * d;
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Graph mixing and coefficient construction

template <typename Scalar>
Var<Scalar> graph_mix(const Var<Scalar> &x, const Var<Scalar> &coefficients, Index groups) {
  const Shape &xs = x.shape();
  const Shape &as = coefficients.shape();
  require(xs.size() == 4, "graph_mix: input must be [N,C,T,V], got " + shape_string(xs));
  const Index n_batch = xs[0], channels = xs[1], frames = xs[2], joints = xs[3];
  require(groups >= 1 && channels % groups == 0,
          "graph_mix: " + std::to_string(channels) + " channels do not split into " + std::to_string(groups) + " groups");
  const Index width = channels / groups;
  const Index rank = static_cast<Index>(as.size());
  bool ok = false;
  if (rank == 3) ok = as == Shape{groups, joints, joints};
  if (rank == 4) ok = as == Shape{n_batch, groups, joints, joints};
  if (rank == 5) ok = as == Shape{n_batch, groups, width, joints, joints};
  require(ok, shapes("graph_mix", xs, as));

  // Iterate over (block, matrix) pairs: a block is `rows` x V of x.
  const Index rows = rank == 5 ? frames : width * frames;
  const Index blocks = rank == 5 ? n_batch * channels : n_batch * groups;
  auto matrix_index = [=](Index blk) -> Index {
    if (rank == 5) return blk; // (n, k, c) flattened matches [N,K,Cg]
    if (rank == 4) return blk; // (n, k)
    return blk % groups;
  };

  auto y = Tensor<Scalar>::uninitialized(xs);
  const Index vv = joints * joints;
  for (Index blk = 0; blk < blocks; ++blk) {
    ConstMatrixMap<Scalar> a(coefficients.value().ptr() + matrix_index(blk) * vv, joints, joints);
    ConstMatrixMap<Scalar> xb(x.value().ptr() + blk * rows * joints, rows, joints);
    MatrixMap<Scalar> yb(y.ptr() + blk * rows * joints, rows, joints);
    // Per-channel blocks are tiny; skip GEMM packing for them.
    if (rank == 5)
      yb.noalias() = xb.lazyProduct(a);
    else
      yb.noalias() = xb * a;
  }
  MacCounter::add(static_cast<std::uint64_t>(n_batch * channels * frames * joints * joints));

  return make_result<Scalar>(std::move(y), {x, coefficients}, [=](Node<Scalar> &self) {
    const Tensor<Scalar> &xv = parent_value(self, 0);
    const Tensor<Scalar> &av = parent_value(self, 1);
    Tensor<Scalar> *gx = parent_grad(self, 0);
    Tensor<Scalar> *ga = parent_grad(self, 1);
    for (Index blk = 0; blk < blocks; ++blk) {
      ConstMatrixMap<Scalar> dy(self.grad.ptr() + blk * rows * joints, rows, joints);
      ConstMatrixMap<Scalar> a(av.ptr() + matrix_index(blk) * vv, joints, joints);
      ConstMatrixMap<Scalar> xb(xv.ptr() + blk * rows * joints, rows, joints);
      if (gx) {
        MatrixMap<Scalar> g(gx->ptr() + blk * rows * joints, rows, joints);
        if (rank == 5)
          g.noalias() += dy.lazyProduct(a.transpose());
        else
          g.noalias() += dy * a.transpose();
      }
      if (ga) {
        MatrixMap<Scalar> g(ga->ptr() + matrix_index(blk) * vv, joints, joints);
        g.noalias() += xb.transpose() * dy;
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> group_gram(const Var<Scalar> &a, const Var<Scalar> &b) {
  require(a.shape().size() == 4 && a.shape() == b.shape(), shapes("group_gram", a.shape(), b.shape()));
  const Index n_batch = a.dim(0), groups = a.dim(1), width = a.dim(2), joints = a.dim(3);
  const Index mats = n_batch * groups;
  auto g = Tensor<Scalar>::uninitialized({n_batch, groups, joints, joints});
  for (Index m = 0; m < mats; ++m)
    MatrixMap<Scalar>(g.ptr() + m * joints * joints, joints, joints).noalias() =
        ConstMatrixMap<Scalar>(a.value().ptr() + m * width * joints, width, joints).transpose() *
        ConstMatrixMap<Scalar>(b.value().ptr() + m * width * joints, width, joints);
  MacCounter::add(static_cast<std::uint64_t>(mats * width * joints * joints));
  return make_result<Scalar>(std::move(g), {a, b}, [=](Node<Scalar> &self) {
    Tensor<Scalar> *ga = parent_grad(self, 0);
    Tensor<Scalar> *gb = parent_grad(self, 1);
    for (Index m = 0; m < mats; ++m) {
      ConstMatrixMap<Scalar> dg(self.grad.ptr() + m * joints * joints, joints, joints);
      if (ga)
        MatrixMap<Scalar>(ga->ptr() + m * width * joints, width, joints).noalias() +=
            ConstMatrixMap<Scalar>(parent_value(self, 1).ptr() + m * width * joints, width, joints) * dg.transpose();
      if (gb)
        MatrixMap<Scalar>(gb->ptr() + m * width * joints, width, joints).noalias() +=
            ConstMatrixMap<Scalar>(parent_value(self, 0).ptr() + m * width * joints, width, joints) * dg;
    }
  });
}

template <typename Scalar>
Var<Scalar> pairwise_difference(const Var<Scalar> &a, const Var<Scalar> &b) {
  require(a.shape().size() == 4 && a.shape() == b.shape(), shapes("pairwise_difference", a.shape(), b.shape()));
  const Index joints = a.dim(3);
  const Index rows = a.value().size() / std::max<Index>(joints, 1);
  Shape out_shape = a.shape();
  out_shape.push_back(joints);
  auto d = Tensor<Scalar>::uninitialized(out_shape);
  for (Index r = 0; r < rows; ++r) {
    Eigen::Map<const Vec<Scalar>> av(a.value().ptr() + r * joints, joints);
    Eigen::Map<const Vec<Scalar>> bv(b.value().ptr() + r * joints, joints);
    MatrixMap<Scalar>(d.ptr() + r * joints * joints, joints, joints) =
        av.replicate(1, joints) - bv.transpose().replicate(joints, 1);
  }
  return make_result<Scalar>(std::move(d), {a, b}, [rows, joints](Node<Scalar> &self) {
    Tensor<Scalar> *ga = parent_grad(self, 0);
    Tensor<Scalar> *gb = parent_grad(self, 1);
    for (Index r = 0; r < rows; ++r) {
      ConstMatrixMap<Scalar> dd(self.grad.ptr() + r * joints * joints, joints, joints);
      if (ga) Eigen::Map<Vec<Scalar>>(ga->ptr() + r * joints, joints) += dd.rowwise().sum();
      if (gb) Eigen::Map<Vec<Scalar>>(gb->ptr() + r * joints, joints) -= dd.colwise().sum().transpose();
    }
  });
}

template <typename Scalar>
Var<Scalar> combine_coefficients(const Var<Scalar> &static_term, const Var<Scalar> &alpha,
                                 const Var<Scalar> &channel_agnostic, const Var<Scalar> &beta,
                                 const Var<Scalar> &channel_specific) {
  const bool has_s = static_term.defined(), has_da = channel_agnostic.defined(), has_ca = channel_specific.defined();
  require(has_da || has_ca, "combine_coefficients: needs at least one dynamic term");
  Index n_batch, groups, width = 1, joints;
  if (has_ca) {
    require(channel_specific.shape().size() == 5, "combine_coefficients: channel-specific term must be [N,K,Cg,V,V]");
    n_batch = channel_specific.dim(0), groups = channel_specific.dim(1), width = channel_specific.dim(2),
    joints = channel_specific.dim(3);
    require(beta.defined() && beta.shape() == Shape{groups}, "combine_coefficients: beta must be [K]");
  } else {
    require(channel_agnostic.shape().size() == 4, "combine_coefficients: channel-agnostic term must be [N,K,V,V]");
    n_batch = channel_agnostic.dim(0), groups = channel_agnostic.dim(1), joints = channel_agnostic.dim(2);
  }
  if (has_da) {
    require(channel_agnostic.shape() == (Shape{n_batch, groups, joints, joints}),
            shapes("combine_coefficients", channel_agnostic.shape(), Shape{n_batch, groups, joints, joints}));
    require(alpha.defined() && alpha.shape() == Shape{groups}, "combine_coefficients: alpha must be [K]");
  }
  if (has_s)
    require(static_term.shape() == (Shape{groups, joints, joints}),
            shapes("combine_coefficients", static_term.shape(), Shape{groups, joints, joints}));

  const Index vv = joints * joints;
  Shape out_shape = has_ca ? Shape{n_batch, groups, width, joints, joints} : Shape{n_batch, groups, joints, joints};
  Tensor<Scalar> out(out_shape);
  for (Index n = 0; n < n_batch; ++n)
    for (Index k = 0; k < groups; ++k)
      for (Index c = 0; c < width; ++c) {
        Eigen::Map<Vec<Scalar>> dst(out.ptr() + ((n * groups + k) * width + c) * vv, vv);
        if (has_s) dst += Eigen::Map<const Vec<Scalar>>(static_term.value().ptr() + k * vv, vv);
        if (has_da)
          dst += alpha.value()[k] * Eigen::Map<const Vec<Scalar>>(channel_agnostic.value().ptr() + (n * groups + k) * vv, vv);
        if (has_ca)
          dst += beta.value()[k] *
                 Eigen::Map<const Vec<Scalar>>(channel_specific.value().ptr() + ((n * groups + k) * width + c) * vv, vv);
      }

  // Parent slots are fixed: 0 static, 1 alpha, 2 agnostic, 3 beta, 4 specific.
  // Missing inputs are stored as empty leaves so indices stay put.
  auto slot = [](const Var<Scalar> &v) { return v.defined() ? v : Var<Scalar>(Tensor<Scalar>()); };
  return make_result<Scalar>(
      std::move(out),
      {slot(static_term), slot(alpha), slot(channel_agnostic), slot(beta), slot(channel_specific)},
      [=](Node<Scalar> &self) {
        Tensor<Scalar> *gs = has_s ? parent_grad(self, 0) : nullptr;
        Tensor<Scalar> *galpha = has_da ? parent_grad(self, 1) : nullptr;
        Tensor<Scalar> *gda = has_da ? parent_grad(self, 2) : nullptr;
        Tensor<Scalar> *gbeta = has_ca ? parent_grad(self, 3) : nullptr;
        Tensor<Scalar> *gca = has_ca ? parent_grad(self, 4) : nullptr;
        for (Index n = 0; n < n_batch; ++n)
          for (Index k = 0; k < groups; ++k)
            for (Index c = 0; c < width; ++c) {
              Eigen::Map<const Vec<Scalar>> d(self.grad.ptr() + ((n * groups + k) * width + c) * vv, vv);
              if (gs) Eigen::Map<Vec<Scalar>>(gs->ptr() + k * vv, vv) += d;
              if (has_da) {
                const Index off = (n * groups + k) * vv;
                if (galpha)
                  (*galpha)[k] += d.dot(Eigen::Map<const Vec<Scalar>>(parent_value(self, 2).ptr() + off, vv));
                if (gda) Eigen::Map<Vec<Scalar>>(gda->ptr() + off, vv) += parent_value(self, 1)[k] * d;
              }
              if (has_ca) {
                const Index off = ((n * groups + k) * width + c) * vv;
                if (gbeta) (*gbeta)[k] += d.dot(Eigen::Map<const Vec<Scalar>>(parent_value(self, 4).ptr() + off, vv));
                if (gca) Eigen::Map<Vec<Scalar>>(gca->ptr() + off, vv) += parent_value(self, 3)[k] * d;
              }
            }
      });
}

template <typename Scalar>
Var<Scalar> joint_skeleton_fuse(const Var<Scalar> &joints, const Var<Scalar> &skeleton, const Var<Scalar> &gamma) {
  const Shape &js = joints.shape();
  require(js.size() == 4, "joint_skeleton_fuse: joint features must be [N,C,T,V], got " + shape_string(js));
  const Index v = js[3];
  const Index rows = js[0] * js[1] * js[2];
  require(skeleton.shape() == (Shape{js[0], js[1], js[2], 1}), shapes("joint_skeleton_fuse", js, skeleton.shape()));
  require(gamma.shape() == Shape{v}, shapes("joint_skeleton_fuse gamma", js, gamma.shape()));
  Tensor<Scalar> y(js);
  MatrixMap<Scalar> out = y.matrix(rows, v);
  out = joints.value().matrix(rows, v) + skeleton.value().data() * gamma.value().data().transpose();
  return make_result<Scalar>(std::move(y), {joints, skeleton, gamma}, [rows, v](Node<Scalar> &self) {
    const auto dy = self.grad.matrix(rows, v);
    if (Tensor<Scalar> *gj = parent_grad(self, 0)) gj->data() += self.grad.data();
    if (Tensor<Scalar> *gs = parent_grad(self, 1)) gs->data() += dy * parent_value(self, 2).data();
    if (Tensor<Scalar> *gg = parent_grad(self, 2)) gg->data() += dy.transpose() * parent_value(self, 1).data();
  });
}

template <typename Scalar>
Var<Scalar> person_pool(const Var<Scalar> &x, const std::vector<Scalar> &weights, Index persons) {
  require(x.shape().size() == 2 && persons >= 1 && x.dim(0) % persons == 0 &&
              static_cast<Index>(weights.size()) == x.dim(0),
          "person_pool: input " + shape_string(x.shape()) + " with " + std::to_string(weights.size()) + " weights and " +
              std::to_string(persons) + " persons");
  const Index n_batch = x.dim(0) / persons, c = x.dim(1);
  Tensor<Scalar> y({n_batch, c});
  const auto in = x.value().matrix(x.dim(0), c);
  auto out = y.matrix(n_batch, c);
  for (Index n = 0; n < n_batch; ++n)
    for (Index m = 0; m < persons; ++m) out.row(n) += weights[static_cast<std::size_t>(n * persons + m)] * in.row(n * persons + m);
  return make_result<Scalar>(std::move(y), {x}, [weights, persons, n_batch, c](Node<Scalar> &self) {
    Tensor<Scalar> *gx = parent_grad(self, 0);
    if (!gx) return;
    auto g = gx->matrix(n_batch * persons, c);
    const auto dy = self.grad.matrix(n_batch, c);
    for (Index n = 0; n < n_batch; ++n)
      for (Index m = 0; m < persons; ++m) g.row(n * persons + m) += weights[static_cast<std::size_t>(n * persons + m)] * dy.row(n);
  });
}

template <typename Scalar>
Var<Scalar> dropout(const Var<Scalar> &x, double rate, bool training, std::mt19937_64 &rng) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor<Scalar> mask(x.shape());
  const Scalar scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Index i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? scale : Scalar(0);
  Tensor<Scalar> y(x.shape(), Vec<Scalar>(x.value().data().cwiseProduct(mask.data())));
  return make_result<Scalar>(std::move(y), {x}, [mask = std::move(mask)](Node<Scalar> &self) {
    if (Tensor<Scalar> *gx = parent_grad(self, 0)) gx->data() += self.grad.data().cwiseProduct(mask.data());
  });
}

template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar> &x, const Tensor<Scalar> &weights) {
  require(x.value().size() == weights.size(), shapes("weighted_sum", x.shape(), weights.shape()));
  Tensor<Scalar> y = Tensor<Scalar>::scalar(x.value().data().dot(weights.data()));
  return make_result<Scalar>(std::move(y), {x}, [weights](Node<Scalar> &self) {
    if (Tensor<Scalar> *gx = parent_grad(self, 0)) gx->data() += self.grad[0] * weights.data();
  });
}

// ---------------------------------------------------------------------------
// Losses

namespace {

template <typename Scalar>
void check_logits(const Var<Scalar> &logits, const std::vector<int> &labels) {
  require(logits.shape().size() == 2, "loss: logits must be [N, classes], got " + shape_string(logits.shape()));
  if (static_cast<Index>(labels.size()) != logits.dim(0))
    throw DataError("loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(logits.dim(0)) + " rows");
  if (labels.empty()) throw DataError("loss: empty batch");
  for (int l : labels)
    if (l < 0 || l >= logits.dim(1))
      throw DataError("loss: label " + std::to_string(l) + " out of range [0," + std::to_string(logits.dim(1)) + ")");
}

template <typename Scalar>
RowMatrix<Scalar> row_softmax(const ConstMatrixMap<Scalar> &z, Vec<Scalar> *log_sum_exp) {
  RowMatrix<Scalar> p(z.rows(), z.cols());
  if (log_sum_exp) log_sum_exp->resize(z.rows());
  for (Index r = 0; r < z.rows(); ++r) {
    const Scalar mx = z.row(r).maxCoeff();
    p.row(r) = (z.row(r).array() - mx).exp().matrix();
    const Scalar total = p.row(r).sum();
    p.row(r) /= total;
    if (log_sum_exp) (*log_sum_exp)[r] = mx + std::log(total);
  }
  return p;
}

} // namespace

template <typename Scalar>
Var<Scalar> cross_entropy(const Var<Scalar> &logits, const std::vector<int> &labels) {
  check_logits(logits, labels);
  const Index rows = logits.dim(0), classes = logits.dim(1);
  const auto z = logits.value().matrix(rows, classes);
  Vec<Scalar> lse;
  RowMatrix<Scalar> p = row_softmax<Scalar>(z, &lse);
  Scalar total = 0;
  for (Index r = 0; r < rows; ++r) total += lse[r] - z(r, labels[static_cast<std::size_t>(r)]);
  Tensor<Scalar> loss = Tensor<Scalar>::scalar(total / static_cast<Scalar>(rows));
  return make_result<Scalar>(std::move(loss), {logits}, [p = std::move(p), labels](Node<Scalar> &self) {
    Tensor<Scalar> *g = parent_grad(self, 0);
    if (!g) return;
    const Scalar scale = self.grad[0] / static_cast<Scalar>(p.rows());
    auto dz = g->matrix(p.rows(), p.cols());
    dz += scale * p;
    for (Index r = 0; r < p.rows(); ++r) dz(r, labels[static_cast<std::size_t>(r)]) -= scale;
  });
}

template <typename Scalar>
Var<Scalar> focal_loss(const Var<Scalar> &logits, const std::vector<int> &labels,
                       const std::vector<double> &class_weights, double focusing) {
  check_logits(logits, labels);
  const Index rows = logits.dim(0), classes = logits.dim(1);
  if (static_cast<Index>(class_weights.size()) != classes)
    throw ConfigError("focal_loss: " + std::to_string(class_weights.size()) + " class weights for " +
                      std::to_string(classes) + " classes");
  const auto z = logits.value().matrix(rows, classes);
  Vec<Scalar> lse;
  RowMatrix<Scalar> p = row_softmax<Scalar>(z, &lse);
  const Scalar gf = static_cast<Scalar>(focusing);
  Scalar total = 0;
  // Per row: dL/dp_label, used by the pullback.
  Vec<Scalar> dl_dp(rows);
  for (Index r = 0; r < rows; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    const Scalar w = static_cast<Scalar>(class_weights[static_cast<std::size_t>(y)]);
    const Scalar log_p = z(r, y) - lse[r];
    const Scalar py = p(r, y);
    const Scalar q = Scalar(1) - py;
    const Scalar mod = gf == Scalar(0) ? Scalar(1) : std::pow(q, gf);
    total += -w * mod * log_p;
    const Scalar dmod = gf == Scalar(0) ? Scalar(0) : gf * std::pow(q, gf - Scalar(1));
    // d/dp [-w (1-p)^g log p] = w (g (1-p)^(g-1) log p - (1-p)^g / p)
    dl_dp[r] = w * (dmod * log_p - mod / py);
  }
  Tensor<Scalar> loss = Tensor<Scalar>::scalar(total / static_cast<Scalar>(rows));
  return make_result<Scalar>(
      std::move(loss), {logits}, [p = std::move(p), dl_dp = std::move(dl_dp), labels](Node<Scalar> &self) {
        Tensor<Scalar> *g = parent_grad(self, 0);
        if (!g) return;
        const Scalar scale = self.grad[0] / static_cast<Scalar>(p.rows());
        auto dz = g->matrix(p.rows(), p.cols());
        for (Index r = 0; r < p.rows(); ++r) {
          const int y = labels[static_cast<std::size_t>(r)];
          const Scalar py = p(r, y);
          // dp_y/dz_j = p_y (delta_jy - p_j)
          dz.row(r) -= (scale * dl_dp[r] * py) * p.row(r);
          dz(r, y) += scale * dl_dp[r] * py;
        }
      });
}

#define DGSTGCN_INSTANTIATE(S)                                                                                      \
  template Var<S> pointwise_conv<S>(const Var<S> &, const Var<S> &, const Var<S> &);                               \
  template Var<S> temporal_conv<S>(const Var<S> &, const Var<S> &, const Var<S> &, Index, Index);                 \
  template Var<S> temporal_max_pool<S>(const Var<S> &, Index, Index);                                             \
  template Var<S> softmax<S>(const Var<S> &, Index);                                                               \
  template Var<S> relu<S>(const Var<S> &);                                                                         \
  template Var<S> tanh<S>(const Var<S> &);                                                                         \
  template Var<S> add<S>(const Var<S> &, const Var<S> &);                                                          \
  template Var<S> mean<S>(const Var<S> &, Index, bool);                                                            \
  template Var<S> reshape<S>(const Var<S> &, Shape);                                                               \
  template Var<S> narrow<S>(const Var<S> &, Index, Index, Index);                                                  \
  template Var<S> concat<S>(const std::vector<Var<S>> &, Index);                                                   \
  template Var<S> expand<S>(const Var<S> &, Index, Index);                                                         \
  template Var<S> batch_norm<S>(const Var<S> &, const Var<S> &, const Var<S> &, Tensor<S> &, Tensor<S> &,          \
                                const BatchNormOptions &);                                                         \
  template Var<S> graph_mix<S>(const Var<S> &, const Var<S> &, Index);                                             \
  template Var<S> group_gram<S>(const Var<S> &, const Var<S> &);                                                   \
  template Var<S> pairwise_difference<S>(const Var<S> &, const Var<S> &);                                          \
  template Var<S> combine_coefficients<S>(const Var<S> &, const Var<S> &, const Var<S> &, const Var<S> &,          \
                                          const Var<S> &);                                                         \
  template Var<S> joint_skeleton_fuse<S>(const Var<S> &, const Var<S> &, const Var<S> &);                          \
  template Var<S> person_pool<S>(const Var<S> &, const std::vector<S> &, Index);                                   \
  template Var<S> dropout<S>(const Var<S> &, double, bool, std::mt19937_64 &);                                     \
  template Var<S> weighted_sum<S>(const Var<S> &, const Tensor<S> &);                                              \
  template Var<S> cross_entropy<S>(const Var<S> &, const std::vector<int> &);                                      \
  template Var<S> focal_loss<S>(const Var<S> &, const std::vector<int> &, const std::vector<double> &, double);

DGSTGCN_INSTANTIATE(float)
DGSTGCN_INSTANTIATE(double)
#undef DGSTGCN_INSTANTIATE

} // namespace dgstgcn
