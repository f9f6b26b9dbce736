#pragma once

#include <vector>

#include "dgstgcn/dg_gcn.hpp"
#include "dgstgcn/dg_tcn.hpp"
#include "dgstgcn/tensor.hpp"

namespace dgstgcn::verify {

// Reference implementations written as explicit loops over raw indices.
// They share no code with the operators they check. Feature maps are
// [N, C, T, V]; normalization is always in inference mode.

using T64 = Tensor<double>;

/// out[n,o,t,v] = sum_i w[o,i] x[n,i,t,v] + b[o]; b may be empty.
T64 pointwise_conv_oracle(const T64 &x, const T64 &w, const T64 &b);

/// Zero-padded dilated convolution along T; w is [Cout, Cin, k].
T64 temporal_conv_oracle(const T64 &x, const T64 &w, const T64 &b, Index dilation, Index stride);

/// Max over each window of in-range frames.
T64 max_pool_oracle(const T64 &x, Index kernel, Index stride);

/// scale * (x - mean) / sqrt(var + eps) + shift, per channel.
T64 batch_norm_oracle(const T64 &x, const T64 &scale, const T64 &shift, const T64 &mean, const T64 &var, double eps);

T64 relu_oracle(const T64 &x);

/// exp(x) / sum exp(x) along `axis`, without max subtraction.
T64 softmax_oracle(const T64 &x, Index axis);

/// G[l,i,j] = sum_k sum_v A[k,v,i] * X'[l,k,v,j] for X' [T,K,V,C] and A [K,V,V].
T64 spatial_fuse_oracle(const T64 &features, const T64 &coefficients);

/// The same contraction with the loops nested in the opposite order.
T64 spatial_fuse_oracle_permuted(const T64 &features, const T64 &coefficients);

/// Explicit dynamic terms for one module: DA [N,K,V,V] and CA [N,K,Cg,V,V]
/// (empty when masked out).
struct DynamicOracle {
  T64 agnostic;
  T64 specific;
};
DynamicOracle dynamic_terms_oracle(const T64 &x, const CoefficientParams<double> &coef, const ComponentMask &mask);

/// Whole spatial module in inference mode. Agnostic coefficients apply the
/// output projection per group first and then fuse the groups with
/// spatial_fuse_oracle; channel-specific coefficients mix per channel first.
T64 dg_gcn_oracle(const DgGcn<double> &module, const T64 &x);

/// One temporal branch on a channel slice.
T64 branch_oracle(const TemporalBranch<double> &branch, const T64 &slice);

/// Shared projection, per-branch oracles and channel concat.
T64 branches_oracle(const DgTcn<double> &module, const T64 &x);

/// Whole temporal module. With fusion on, the skeleton feature is computed
/// separately and run through the branches in a second pass.
T64 dg_tcn_oracle(const DgTcn<double> &module, const T64 &x);

/// Channel slice [start, start + length) of a [N, C, T, V] map.
T64 channel_slice(const T64 &x, Index start, Index length);

} // namespace dgstgcn::verify
