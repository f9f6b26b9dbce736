#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dgstgcn/autodiff.hpp"

namespace dgstgcn {

// Differentiable operators. Feature maps use the [N, C, T, V] layout
// (batch, channels, frames, joints). Every operator's pullback is covered by
// the finite-difference suite.

/// out[n,o,...] = sum_i w[o,i] x[n,i,...] (+ b[o]). x has rank >= 2; trailing
/// axes are flattened, so [N, C] inputs act as an affine map.
template <typename Scalar>
Var<Scalar> pointwise_conv(const Var<Scalar> &x, const Var<Scalar> &w, const Var<Scalar> &b = {});

/// Per-joint 1D convolution along T with weights [Cout, Cin, k]. Zero padding
/// of dilation*(k-1)/2 on each side gives T' = ceil(T / stride).
template <typename Scalar>
Var<Scalar> temporal_conv(const Var<Scalar> &x, const Var<Scalar> &w, const Var<Scalar> &b, Index dilation,
                          Index stride);

/// Max over a temporal window; padded positions never win. The gradient goes
/// to the first maximal index in each window.
template <typename Scalar>
Var<Scalar> temporal_max_pool(const Var<Scalar> &x, Index kernel, Index stride);

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar> &x, Index axis);

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar> &x);

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar> &x);

template <typename Scalar>
Var<Scalar> add(const Var<Scalar> &a, const Var<Scalar> &b);

/// Mean over one axis.
template <typename Scalar>
Var<Scalar> mean(const Var<Scalar> &x, Index axis, bool keepdim = true);

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar> &x, Shape shape);

template <typename Scalar>
Var<Scalar> narrow(const Var<Scalar> &x, Index axis, Index start, Index length);

template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>> &parts, Index axis);

/// Repeat a size-1 axis `count` times.
template <typename Scalar>
Var<Scalar> expand(const Var<Scalar> &x, Index axis, Index count);

/// Per-channel normalization over every axis except 1.
struct BatchNormOptions {
  bool training = true;
  double eps = 1e-5;
  double momentum = 0.1;
};

template <typename Scalar>
Var<Scalar> batch_norm(const Var<Scalar> &x, const Var<Scalar> &scale, const Var<Scalar> &shift,
                       Tensor<Scalar> &running_mean, Tensor<Scalar> &running_var, const BatchNormOptions &opts);

/// Joint mixing with coefficient matrices indexed [source v, target i]:
///   y[n, (k,c), t, i] = sum_v x[n, (k,c), t, v] * A[.., v, i]
/// x has K*Cg channels. A is [K,V,V] (shared), [N,K,V,V] (per sample) or
/// [N,K,Cg,V,V] (per sample and channel).
template <typename Scalar>
Var<Scalar> graph_mix(const Var<Scalar> &x, const Var<Scalar> &coefficients, Index groups);

/// G[n,k,v,i] = sum_c a[n,k,c,v] b[n,k,c,i] for a, b of shape [N,K,Cg,V].
template <typename Scalar>
Var<Scalar> group_gram(const Var<Scalar> &a, const Var<Scalar> &b);

/// D[n,k,c,v,i] = a[n,k,c,v] - b[n,k,c,i].
template <typename Scalar>
Var<Scalar> pairwise_difference(const Var<Scalar> &a, const Var<Scalar> &b);

/// A = static[k] + alpha[k] * channel_agnostic[n,k] + beta[k] * channel_specific[n,k,c].
/// Any of static / channel_agnostic / channel_specific may be undefined, but
/// at least one of the dynamic terms must be present. Result is
/// [N,K,Cg,V,V] when channel_specific is given, else [N,K,V,V].
template <typename Scalar>
Var<Scalar> combine_coefficients(const Var<Scalar> &static_term, const Var<Scalar> &alpha,
                                 const Var<Scalar> &channel_agnostic, const Var<Scalar> &beta,
                                 const Var<Scalar> &channel_specific);

/// y[n,c,t,i] = joints[n,c,t,i] + gamma[i] * skeleton[n,c,t,0].
template <typename Scalar>
Var<Scalar> joint_skeleton_fuse(const Var<Scalar> &joints, const Var<Scalar> &skeleton, const Var<Scalar> &gamma);

/// Weighted pooling of groups of rows: x is [N*M, C], weights has N*M entries
/// (each group's weights must sum to 1); result is [N, C].
template <typename Scalar>
Var<Scalar> person_pool(const Var<Scalar> &x, const std::vector<Scalar> &weights, Index persons);

template <typename Scalar>
Var<Scalar> dropout(const Var<Scalar> &x, double rate, bool training, std::mt19937_64 &rng);

/// sum(x * weights) as a rank-0 tensor.
template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar> &x, const Tensor<Scalar> &weights);

/// Mean of -log softmax(logits)[label]; logits [N, n_classes].
template <typename Scalar>
Var<Scalar> cross_entropy(const Var<Scalar> &logits, const std::vector<int> &labels);

/// Mean of -w[label] * (1 - p)^focusing * log p, with p the label probability.
template <typename Scalar>
Var<Scalar> focal_loss(const Var<Scalar> &logits, const std::vector<int> &labels,
                       const std::vector<double> &class_weights, double focusing);

/// Multiply-accumulate counter advanced by the contraction operators
/// (pointwise_conv, temporal_conv, graph_mix, group_gram). Thread-local.
struct MacCounter {
  static std::uint64_t value();
  static void reset();
  static void add(std::uint64_t macs);
};

} // namespace dgstgcn
