#include "dgstgcn/layers.hpp"

#include <cmath>

namespace dgstgcn {

template <typename Scalar>
Tensor<Scalar> normal_tensor(Shape shape, double stddev, std::mt19937_64 &rng) {
  Tensor<Scalar> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
  return t;
}

template <typename Scalar>
Tensor<Scalar> he_normal(Shape shape, Index fan_in, std::mt19937_64 &rng) {
  return normal_tensor<Scalar>(std::move(shape), std::sqrt(2.0 / static_cast<double>(std::max<Index>(fan_in, 1))), rng);
}

template <typename Scalar>
PointwiseConv<Scalar>::PointwiseConv(Index in, Index out, bool with_bias, std::mt19937_64 &rng)
    : weight(he_normal<Scalar>({out, in}, in, rng)) {
  if (with_bias) bias = Parameter<Scalar>(Tensor<Scalar>({out}));
}

template <typename Scalar>
void PointwiseConv<Scalar>::collect(ParamSink<Scalar> &sink, const std::string &prefix) {
  sink.add(prefix + ".weight", weight);
  sink.add(prefix + ".bias", bias);
}

template <typename Scalar>
TemporalConv<Scalar>::TemporalConv(Index in, Index out, Index kernel, Index dilation_, Index stride_, bool with_bias,
                                   std::mt19937_64 &rng)
    : weight(he_normal<Scalar>({out, in, kernel}, in * kernel, rng)), dilation(dilation_), stride(stride_) {
  if (kernel % 2 == 0) throw ConfigError("temporal kernel must be odd, got " + std::to_string(kernel));
  if (with_bias) bias = Parameter<Scalar>(Tensor<Scalar>({out}));
}

template <typename Scalar>
void TemporalConv<Scalar>::collect(ParamSink<Scalar> &sink, const std::string &prefix) {
  sink.add(prefix + ".weight", weight);
  sink.add(prefix + ".bias", bias);
}

template <typename Scalar>
BatchNorm<Scalar>::BatchNorm(Index channels, double eps_, double momentum_)
    : scale(Tensor<Scalar>({channels}, Scalar(1))), shift(Tensor<Scalar>({channels})), running_mean({channels}),
      running_var({channels}, Scalar(1)), eps(eps_), momentum(momentum_) {}

template <typename Scalar>
void BatchNorm<Scalar>::collect(ParamSink<Scalar> &sink, const std::string &prefix) {
  sink.add(prefix + ".scale", scale);
  sink.add(prefix + ".shift", shift);
  sink.add_buffer(prefix + ".running_mean", running_mean);
  sink.add_buffer(prefix + ".running_var", running_var);
}

#define DGSTGCN_INSTANTIATE(S)                                                                                         \
  template Tensor<S> normal_tensor<S>(Shape, double, std::mt19937_64 &);                                               \
  template Tensor<S> he_normal<S>(Shape, Index, std::mt19937_64 &);                                                    \
  template struct PointwiseConv<S>;                                                                                    \
  template struct TemporalConv<S>;                                                                                     \
  template struct BatchNorm<S>;
DGSTGCN_INSTANTIATE(float)
DGSTGCN_INSTANTIATE(double)
#undef DGSTGCN_INSTANTIATE

} // namespace dgstgcn
