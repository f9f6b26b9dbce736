#pragma once

#include <vector>

#include "dgstgcn/autodiff.hpp"

namespace dgstgcn {

struct SgdOptions {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// buf <- momentum * buf + (grad + weight_decay * value); value <- value - lr * buf.
/// Parameters marked non-trainable are skipped. Gradients are left for the
/// caller to zero. Throws NumericalError naming the first non-finite gradient.
template <typename Scalar>
void sgd_momentum_step(const std::vector<NamedParameter<Scalar>> &params, const SgdOptions &opts);

/// 0.5 * base_lr * (1 + cos(pi * epoch / total_epochs)).
double cosine_lr(double epoch, double total_epochs, double base_lr = 0.1);

} // namespace dgstgcn
