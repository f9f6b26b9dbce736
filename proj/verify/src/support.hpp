#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "dgstgcn/layers.hpp"
#include "dgstgcn/tensor.hpp"

namespace dgstgcn::verify {

inline Tensor<double> randn(Shape shape, std::mt19937_64 &rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return t;
}

inline Tensor<double> uniform(Shape shape, std::mt19937_64 &rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

inline Index uniform_int(std::mt19937_64 &rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

/// max |a - b| / max(1, |b|); infinity on shape mismatch.
template <typename A, typename B>
double max_rel_diff(const Tensor<A> &a, const Tensor<B> &b) {
  if (a.shape() != b.shape()) return INFINITY;
  double worst = 0;
  for (Index i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]), y = static_cast<double>(b[i]);
    worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(y)));
  }
  return worst;
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

/// Move normalization statistics and affine terms, and the fusion / mixing
/// weights, away from their initial values so nothing is trivially inert.
template <typename Scalar>
void randomize_state(ParamSink<Scalar> &sink, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto ends_with = [](const std::string &s, const std::string &suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (auto &b : sink.buffers) {
    Tensor<Scalar> &t = *b.buffer;
    for (Index i = 0; i < t.size(); ++i)
      t[i] = static_cast<Scalar>(ends_with(b.name, "running_var") ? pos(rng) : 0.2 * normal(rng));
  }
  for (auto &p : sink.params) {
    Tensor<Scalar> &t = p.param->value();
    if (ends_with(p.name, ".scale"))
      for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(pos(rng));
    else if (ends_with(p.name, ".shift") || ends_with(p.name, ".bias") || ends_with(p.name, ".alpha") ||
             ends_with(p.name, ".beta") || ends_with(p.name, ".gamma") || ends_with(p.name, ".refinement"))
      for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(0.5 * normal(rng));
  }
}

} // namespace dgstgcn::verify
