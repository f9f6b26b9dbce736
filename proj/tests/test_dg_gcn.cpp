#include <doctest.h>

#include <cmath>
#include <random>

#include "dgstgcn/dg_gcn.hpp"
#include "dgstgcn/ops.hpp"
#include "dgstgcn/skeleton.hpp"

using namespace dgstgcn;
using V = Var<double>;
using T = Tensor<double>;

namespace {

T randn(Shape s, std::mt19937_64 &rng) {
  std::normal_distribution<double> n;
  T t(std::move(s));
  for (Index i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

// Projections become identities and the norms pass values through unchanged.
void make_transparent(DgGcn<double> &g) {
  for (PointwiseConv<double> *p : {&g.input_proj, &g.output_proj}) {
    T &w = p->weight.value();
    w.set_zero();
    for (Index i = 0; i < std::min(w.dim(0), w.dim(1)); ++i) w(i, i) = 1;
    p->bias.value().set_zero();
  }
  for (BatchNorm<double> *bn : {&g.input_norm, &g.output_norm}) bn->running_var = T(bn->running_var.shape(), 1 - bn->eps);
}

} // namespace

TEST_CASE("coefficient initialization") {
  std::mt19937_64 rng(1);
  const auto small = init_coefficients<double>(2, 1, 3, 4, {}, rng);
  CHECK(small.static_term.value().shape() == Shape{1, 2, 2});
  CHECK(small.alpha.value() == T({1}));
  CHECK(small.beta.value() == T({1}));

  const auto p = init_coefficients<double>(25, 8, 64, 64, {}, rng);
  const T &pa = p.static_term.value();
  CHECK(pa.shape() == Shape{8, 25, 25});
  const double mean = pa.data().mean();
  const double sd = std::sqrt((pa.data().array() - mean).square().mean());
  CHECK(std::abs(sd - 0.2) < 0.2 * 0.2);
  CHECK(p.encoder_a.weight.value().shape() == Shape{64, 64});
  CHECK(p.encoder_a.weight.value() != p.encoder_b.weight.value());

  const auto dyn_only = init_coefficients<double>(5, 2, 3, 4, {false, true, true}, rng);
  CHECK(!dyn_only.static_term.defined());
  CHECK(dyn_only.alpha.value()[0] == 1.0);
  CHECK_THROWS_AS(init_coefficients<double>(5, 8, 3, 4, {}, rng), ConfigError);
  CHECK_THROWS_AS(init_coefficients<double>(5, 2, 3, 4, {false, false, false}, rng), ConfigError);
}

TEST_CASE("dynamic terms") {
  std::mt19937_64 rng(2);
  SUBCASE("zero encoders give uniform DA and zero CA") {
    auto p = init_coefficients<double>(4, 2, 3, 4, {}, rng);
    for (auto *enc : {&p.encoder_a, &p.encoder_b}) {
      enc->weight.value().set_zero();
      enc->bias.value().set_zero();
    }
    const auto terms = dynamic_terms(V(randn({2, 3, 5, 4}, rng)), p, {});
    for (Index i = 0; i < terms.agnostic.value().size(); ++i) CHECK(terms.agnostic.value()[i] == doctest::Approx(0.25));
    for (Index i = 0; i < terms.specific.value().size(); ++i) CHECK(terms.specific.value()[i] == 0.0);
  }
  SUBCASE("hand-evaluated pairwise difference") {
    const T a({1, 1, 1, 2}, {1, 0});
    const T b({1, 1, 1, 2}, {0, 0});
    const T ca = tanh(pairwise_difference(V(a), V(b))).value();
    CHECK(ca(0, 0, 0, 0, 0) == doctest::Approx(std::tanh(1.0)));
    CHECK(ca(0, 0, 0, 0, 1) == doctest::Approx(std::tanh(1.0)));
    CHECK(ca(0, 0, 0, 1, 0) == 0.0);
    CHECK(ca(0, 0, 0, 1, 1) == 0.0);
  }
  SUBCASE("shapes") {
    auto p = init_coefficients<double>(5, 2, 3, 6, {}, rng);
    const auto terms = dynamic_terms(V(randn({2, 3, 4, 5}, rng)), p, {});
    CHECK(terms.agnostic.shape() == Shape{2, 2, 5, 5});
    CHECK(terms.specific.shape() == Shape{2, 2, 3, 5, 5});
  }
}

TEST_CASE("spatial mixing") {
  std::mt19937_64 rng(3);
  SpatialConfig sc;
  sc.groups = 2;
  DgGcn<double> g(4, 4, 3, sc, {}, {}, rng);
  make_transparent(g);
  const T x = randn({1, 4, 2, 3}, rng);
  SUBCASE("identity coefficients") {
    T &pa = g.coef.static_term.value();
    pa.set_zero();
    for (Index k = 0; k < 2; ++k)
      for (Index v = 0; v < 3; ++v) pa(k, v, v) = 1;
    const T y = g(V(x), false).value();
    for (Index i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-12));
  }
  SUBCASE("averaging coefficients") {
    g.coef.static_term.value() = T({2, 3, 3}, 1.0 / 3.0);
    const T y = g(V(x), false).value();
    for (Index c = 0; c < 4; ++c)
      for (Index t = 0; t < 2; ++t) {
        const double m = (x(0, c, t, 0) + x(0, c, t, 1) + x(0, c, t, 2)) / 3;
        for (Index v = 0; v < 3; ++v) CHECK(y(0, c, t, v) == doctest::Approx(m).epsilon(1e-12));
      }
  }
}

TEST_CASE("static-only module ignores the dynamic path") {
  std::mt19937_64 rng(4);
  SpatialConfig sc;
  sc.groups = 2;
  sc.mask = {true, false, false};
  DgGcn<double> g(3, 4, 5, sc, {}, {}, rng);
  CHECK(!g.coef.encoder_a.weight.defined());
  const T x = randn({2, 3, 6, 5}, rng);
  T reversed = x;
  for (Index n = 0; n < 2; ++n)
    for (Index c = 0; c < 3; ++c)
      for (Index t = 0; t < 6; ++t)
        for (Index v = 0; v < 5; ++v) reversed(n, c, t, v) = x(n, c, 5 - t, v);
  const T a = g(V(x), false).value(), b = g(V(reversed), false).value();
  for (Index n = 0; n < 2; ++n)
    for (Index c = 0; c < 4; ++c)
      for (Index t = 0; t < 6; ++t)
        for (Index v = 0; v < 5; ++v) CHECK(a(n, c, t, v) == doctest::Approx(b(n, c, 5 - t, v)).epsilon(1e-12));
}

TEST_CASE("topology modes") {
  std::mt19937_64 rng(5);
  const std::vector<Bone> bones = tree_bones(5);
  SpatialConfig fixed;
  fixed.mode = SpatialMode::fixed_topology;
  fixed.groups = 3;
  fixed.mask = {true, false, false};
  SpatialConfig refined = fixed;
  refined.mode = SpatialMode::refined_topology;
  std::mt19937_64 r1(6), r2(6);
  DgGcn<double> gf(3, 6, 5, fixed, bones, {}, r1);
  DgGcn<double> gr(3, 6, 5, refined, bones, {}, r2);
  const T x = randn({2, 3, 4, 5}, rng);
  CHECK(gf(V(x), false).value() == gr(V(x), false).value());
  CHECK(!gf.coefficients(V(x)).requires_grad());
  CHECK(gr.coefficients(V(x)).requires_grad());
  CHECK_THROWS_AS(DgGcn<double>(3, 6, 5, fixed, {}, {}, rng), ConfigError);
  SpatialConfig wrong = fixed;
  wrong.mask = {};
  CHECK_THROWS_AS(DgGcn<double>(3, 6, 5, wrong, bones, {}, rng), ConfigError);
}
