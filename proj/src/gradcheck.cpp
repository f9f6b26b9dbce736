#include "dgstgcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dgstgcn/ops.hpp"

namespace dgstgcn {

GradCheckReport finite_diff_check(const std::function<Var<double>()> &f, std::vector<Var<double>> leaves,
                                  double eps, std::uint64_t seed) {
  Tensor<double> projection;
  auto objective = [&](const Var<double> &out) {
    if (out.value().size() == 1) return out;
    if (projection.shape() != out.shape()) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal;
      projection = Tensor<double>(out.shape());
      for (Index i = 0; i < projection.size(); ++i) projection[i] = normal(rng);
    }
    return weighted_sum(out, projection);
  };

  for (auto &leaf : leaves) leaf.zero_grad();
  backward(objective(f()));
  std::vector<Tensor<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto &leaf : leaves) analytic.push_back(leaf.grad());

  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    Tensor<double> &value = leaves[l].mutable_value();
    for (Index i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double up = objective(f()).value()[0];
      value[i] = saved - eps;
      const double down = objective(f()).value()[0];
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[l][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), 1.0});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err >= report.max_rel_error) {
        report.max_rel_error = rel_err;
        report.worst_leaf = l;
        report.worst_index = i;
      }
      ++report.coordinates;
    }
  }
  return report;
}

GradCheckReport finite_diff_check(const std::function<Var<double>(const std::vector<Var<double>> &)> &op,
                                  const std::vector<Tensor<double>> &inputs, double eps, std::uint64_t seed) {
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto &t : inputs) leaves.emplace_back(t, true);
  return finite_diff_check([&] { return op(leaves); }, leaves, eps, seed);
}

} // namespace dgstgcn
