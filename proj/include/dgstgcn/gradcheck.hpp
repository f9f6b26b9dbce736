#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dgstgcn/autodiff.hpp"

namespace dgstgcn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_leaf = 0;
  Index worst_index = 0;
  Index coordinates = 0;
};

/// Compare reverse-mode gradients of `f` with respect to `leaves` against
/// central differences (f(x+eps) - f(x-eps)) / 2eps, one coordinate at a
/// time. Non-scalar outputs are reduced with a fixed random projection drawn
/// from `seed`. Per coordinate the error is |analytic - numeric| divided by
/// max(|analytic|, |numeric|, 1).
GradCheckReport finite_diff_check(const std::function<Var<double>()> &f, std::vector<Var<double>> leaves,
                                  double eps = 1e-4, std::uint64_t seed = 0);

/// Convenience form for a single operator: each input becomes a leaf.
GradCheckReport finite_diff_check(const std::function<Var<double>(const std::vector<Var<double>> &)> &op,
                                  const std::vector<Tensor<double>> &inputs, double eps = 1e-4,
                                  std::uint64_t seed = 0);

} // namespace dgstgcn
