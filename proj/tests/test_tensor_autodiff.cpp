#include <doctest.h>

#include <cmath>
#include <random>

#include "dgstgcn/gradcheck.hpp"
#include "dgstgcn/ops.hpp"
#include "dgstgcn/optim.hpp"

using namespace dgstgcn;
using V = Var<double>;
using T = Tensor<double>;

namespace {

T seq(Shape shape, std::initializer_list<double> v) { return T(std::move(shape), v); }

std::vector<double> values(const T &t) { return {t.ptr(), t.ptr() + t.size()}; }

} // namespace

TEST_CASE("pointwise conv") {
  SUBCASE("identity weights reproduce the input") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    T x({2, 3, 2, 2});
    for (Index i = 0; i < x.size(); ++i) x[i] = n(rng);
    T w({3, 3});
    for (Index i = 0; i < 3; ++i) w(i, i) = 1;
    CHECK(pointwise_conv(V(x), V(w), V(T({3}))).value() == x);
  }
  SUBCASE("ones sum channels") {
    const V y = pointwise_conv(V(T({1, 2, 1, 1}, 1.0)), V(seq({1, 2}, {1, 1})));
    CHECK(y.value()[0] == 2.0);
  }
  SUBCASE("mismatch names both shapes") {
    try {
      pointwise_conv(V(T({1, 3, 2, 2})), V(T({4, 2})));
      FAIL("expected DimensionError");
    } catch (const DimensionError &e) {
      const std::string msg = e.what();
      CHECK(msg.find("[1,3,2,2]") != std::string::npos);
      CHECK(msg.find("[4,2]") != std::string::npos);
    }
  }
}

TEST_CASE("temporal conv") {
  const T x = seq({1, 1, 4, 1}, {1, 2, 3, 4});
  CHECK(values(temporal_conv(V(x), V(T({1, 1, 3}, 1.0)), V(), 1, 1).value()) == std::vector<double>{3, 6, 9, 7});
  CHECK(temporal_conv(V(x), V(T({1, 1, 1}, 1.0)), V(), 1, 1).value() == x);
  CHECK(temporal_conv(V(T({1, 2, 64, 3})), V(T({2, 2, 3})), V(), 1, 2).shape() == Shape{1, 2, 32, 3});
  CHECK_THROWS_AS(temporal_conv(V(x), V(T({1, 1, 2}, 1.0)), V(), 1, 1), ConfigError);
}

TEST_CASE("temporal max pool") {
  CHECK(values(temporal_max_pool(V(seq({1, 1, 3, 1}, {1, 5, 2})), 3, 1).value()) == std::vector<double>{5, 5, 5});
  CHECK(temporal_max_pool(V(seq({1, 1, 4, 1}, {1, 2, 3, 4})), 3, 2).shape() == Shape{1, 1, 2, 1});
  const T constant({1, 2, 5, 2}, -3.0);
  CHECK(temporal_max_pool(V(constant), 3, 1).value() == constant);
}

TEST_CASE("softmax") {
  CHECK(values(softmax(V(T({2})), 0).value()) == std::vector<double>{0.5, 0.5});
  CHECK(values(softmax(V(T({2, 2})), 0).value()) == std::vector<double>{0.5, 0.5, 0.5, 0.5});
  const T x = seq({3, 3}, {0.3, -1.2, 2.0, 0.1, 0.7, -0.4, 1.5, 0.0, -2.2});
  const T y = softmax(V(x), 0).value();
  for (Index c = 0; c < 3; ++c) {
    double z = 0;
    for (Index r = 0; r < 3; ++r) z += std::exp(x(r, c));
    double s = 0;
    for (Index r = 0; r < 3; ++r) {
      CHECK(y(r, c) == doctest::Approx(std::exp(x(r, c)) / z).epsilon(1e-12));
      s += y(r, c);
    }
    CHECK(std::abs(s - 1) < 1e-6);
  }
  CHECK(softmax(V(seq({2}, {1000, 0})), 0).value().all_finite());
}

TEST_CASE("elementwise") {
  CHECK(tanh(V(T({1}))).value()[0] == 0.0);
  CHECK(values(relu(V(seq({2}, {-1, 2}))).value()) == std::vector<double>{0, 2});
  const auto r = finite_diff_check([](const auto &v) { return tanh(v[0]); }, {T({1})});
  CHECK(r.max_rel_error < 1e-6);
  V x(T({1}), true);
  backward(tanh(x));
  CHECK(x.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("batch norm") {
  Tensor<double> mean({2}), var({2}, 1.0);
  SUBCASE("constant input gives the shift") {
    const V y = batch_norm(V(T({4, 2, 3, 1}, 7.0)), V(T({2}, 2.0)), V(seq({2}, {0.5, -1})), mean, var, {});
    for (Index i = 0; i < y.value().size(); ++i) CHECK(y.value()[i] == doctest::Approx(i / 3 % 2 ? -1.0 : 0.5));
  }
  SUBCASE("training mode centers each channel") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(4.0, 3.0);
    T x({5, 3, 4, 2});
    for (Index i = 0; i < x.size(); ++i) x[i] = n(rng);
    Tensor<double> m3({3}), v3({3}, 1.0);
    const T y = batch_norm(V(x), V(T({3}, 1.0)), V(T({3})), m3, v3, {}).value();
    for (Index c = 0; c < 3; ++c) {
      double s = 0, q = 0;
      for (Index i = 0; i < 5; ++i)
        for (Index r = 0; r < 8; ++r) {
          const double v = y[(i * 3 + c) * 8 + r];
          s += v;
          q += v * v;
        }
      CHECK(std::abs(s / 40) < 1e-5);
      CHECK(q / 40 == doctest::Approx(1.0).epsilon(1e-3));
    }
    CHECK(m3[0] != 0.0); // running statistics moved
  }
  SUBCASE("inference before training uses the initial statistics") {
    const T x = seq({1, 2, 1, 1}, {0.5, -0.25});
    const T y = batch_norm(V(x), V(T({2}, 1.0)), V(T({2})), mean, var, {false, 1e-5, 0.1}).value();
    CHECK(y[0] == doctest::Approx(0.5 / std::sqrt(1 + 1e-5)));
  }
}

TEST_CASE("sgd with momentum") {
  auto step = [](double momentum, double grad, int steps) {
    Parameter<double> p(T({1}, 1.0));
    for (int i = 0; i < steps; ++i) {
      p.grad()[0] = grad;
      sgd_momentum_step<double>({{"p", &p}}, {0.1, momentum, 0.0});
    }
    return p.value()[0];
  };
  CHECK(step(0.9, 0.0, 1) == 1.0);
  CHECK(step(0.0, 1.0, 1) == doctest::Approx(0.9));
  CHECK(step(0.9, 1.0, 2) == doctest::Approx(0.71));
  Parameter<double> bad(T({1}, 1.0));
  bad.grad()[0] = NAN;
  CHECK_THROWS_AS(sgd_momentum_step<double>({{"bad", &bad}}, {}), NumericalError);
}

TEST_CASE("cosine learning rate") {
  CHECK(cosine_lr(0, 100) == doctest::Approx(0.1));
  CHECK(cosine_lr(100, 100) == doctest::Approx(0.0));
  CHECK(cosine_lr(50, 100, 0.4) == doctest::Approx(0.2));
  CHECK_THROWS_AS(cosine_lr(0, 0), ConfigError);
}

TEST_CASE("finite differences") {
  CHECK(finite_diff_check([](const auto &v) { return pointwise_conv(v[0], v[1]); },
                          {T({2, 3}, 0.5), seq({2, 3}, {1, -2, 3, 0.5, 0, 1})})
            .max_rel_error < 1e-9);
  CHECK(finite_diff_check([](const auto &v) { return tanh(tanh(v[0])); }, {seq({3}, {-0.7, 0.2, 1.1})}).max_rel_error <
        1e-6);
}

TEST_CASE("operators are deterministic") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  T x({2, 4, 5, 3}), a({2, 3, 3});
  for (Index i = 0; i < x.size(); ++i) x[i] = n(rng);
  for (Index i = 0; i < a.size(); ++i) a[i] = n(rng);
  CHECK(graph_mix(V(x), V(a), 2).value() == graph_mix(V(x), V(a), 2).value());
}
