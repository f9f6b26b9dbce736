#include "dgstgcn/optim.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dgstgcn {

template <typename Scalar>
void sgd_momentum_step(const std::vector<NamedParameter<Scalar>> &params, const SgdOptions &opts) {
  for (const auto &[name, p] : params) {
    if (!p->trainable()) continue;
    const Tensor<Scalar> &g = p->grad();
    if (!g.all_finite()) {
      std::ostringstream os;
      os << "non-finite gradient in parameter '" << name << "' " << shape_string(g.shape()) << ", max |g| = "
         << g.data().cwiseAbs().maxCoeff();
      throw NumericalError(os.str());
    }
  }
  const auto lr = static_cast<Scalar>(opts.lr);
  const auto mom = static_cast<Scalar>(opts.momentum);
  const auto wd = static_cast<Scalar>(opts.weight_decay);
  for (const auto &np : params) {
    Parameter<Scalar> &p = *np.param;
    if (!p.trainable()) continue;
    auto &buf = p.momentum().data();
    auto &value = p.value().data();
    buf = mom * buf + (p.grad().data() + wd * value);
    value -= lr * buf;
  }
}

double cosine_lr(double epoch, double total_epochs, double base_lr) {
  if (total_epochs <= 0) throw ConfigError("cosine_lr: total epochs must be positive");
  if (epoch < 0 || epoch > total_epochs) throw ConfigError("cosine_lr: epoch outside [0, total]");
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * epoch / total_epochs));
}

template void sgd_momentum_step<float>(const std::vector<NamedParameter<float>> &, const SgdOptions &);
template void sgd_momentum_step<double>(const std::vector<NamedParameter<double>> &, const SgdOptions &);

} // namespace dgstgcn
