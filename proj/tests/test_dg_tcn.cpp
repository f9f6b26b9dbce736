#include <doctest.h>

#include <random>

#include "dgstgcn/dg_tcn.hpp"
#include "dgstgcn/profiler.hpp"

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

void identity(PointwiseConv<double> &p) {
  T &w = p.weight.value();
  w.set_zero();
  for (Index i = 0; i < std::min(w.dim(0), w.dim(1)); ++i) w(i, i) = 1;
  p.bias.value().set_zero();
}

void pass_through(BatchNorm<double> &bn) { bn.running_var = T(bn.running_var.shape(), 1 - bn.eps); }

} // namespace

TEST_CASE("branch widths") {
  CHECK(branch_widths(64, default_branches()) == std::vector<Index>{10, 10, 10, 10, 10, 14});
  CHECK(branch_widths(6, default_branches()) == std::vector<Index>{1, 1, 1, 1, 1, 1});
  std::vector<Branch> explicit_widths = default_branches();
  for (auto &b : explicit_widths) b.width = 2;
  CHECK_THROWS_AS(branch_widths(13, explicit_widths), ConfigError);
  CHECK(branch_widths(12, explicit_widths) == std::vector<Index>(6, 2));
}

TEST_CASE("multi-group temporal module") {
  std::mt19937_64 rng(1);
  SUBCASE("a single full-width pointwise branch with identity weights is the identity") {
    TemporalConfig tc;
    tc.fusion = FusionMode::off;
    tc.inner_relu = false;
    tc.branches = {Branch{BranchKind::pointwise, 1, 1, 0}};
    DgTcn<double> m(4, 1, 3, tc, {}, rng);
    identity(m.input_proj);
    identity(m.output_proj);
    pass_through(m.input_norm);
    pass_through(m.output_norm);
    T &w = m.branches[0].conv.weight.value();
    w.set_zero();
    for (Index i = 0; i < 4; ++i) w(i, i, 0) = 1;
    m.branches[0].conv.bias.value().set_zero();
    pass_through(m.branches[0].norm);
    const T x = randn({2, 4, 5, 3}, rng);
    const T y = m(V(x), false).value();
    for (Index i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-12));
  }
  SUBCASE("constant-in-time input stays constant away from the borders") {
    TemporalConfig tc;
    tc.fusion = FusionMode::off;
    DgTcn<double> m(12, 1, 2, tc, {}, rng);
    T x({1, 12, 20, 2});
    for (Index c = 0; c < 12; ++c)
      for (Index t = 0; t < 20; ++t)
        for (Index v = 0; v < 2; ++v) x(0, c, t, v) = 0.1 * static_cast<double>(c) - 0.3 * static_cast<double>(v);
    const T y = m(V(x), false).value();
    for (Index c = 0; c < 12; ++c)
      for (Index t = 4; t < 16; ++t) CHECK(y(0, c, t, 1) == doctest::Approx(y(0, c, 4, 1)).epsilon(1e-12));
  }
  for (FusionMode f : {FusionMode::off, FusionMode::djsf, FusionMode::concat, FusionMode::sum})
    for (Index stride : {1, 2})
      for (Index frames : {7, 8}) {
        TemporalConfig tc;
        tc.fusion = f;
        DgTcn<double> m(12, stride, 3, tc, {}, rng);
        CHECK(m(V(randn({1, 12, frames, 3}, rng)), true).shape() == Shape{1, 12, (frames + stride - 1) / stride, 3});
      }
}

TEST_CASE("joint-skeleton fusion") {
  std::mt19937_64 rng(2);
  TemporalConfig djsf;
  TemporalConfig off = djsf;
  off.fusion = FusionMode::off;
  std::mt19937_64 r1(3), r2(3);
  DgTcn<double> fused(12, 1, 4, djsf, {}, r1);
  DgTcn<double> plain(12, 1, 4, off, {}, r2);
  const T x = randn({2, 12, 6, 4}, rng);

  SUBCASE("gamma = 0 is bit-identical to the plain path in inference mode") {
    CHECK(fused.gamma.value() == T({4}));
    CHECK(fused(V(x), false).value() == plain(V(x), false).value());
  }
  SUBCASE("joints equal to the skeleton give (1 + gamma) S") {
    T same({1, 12, 6, 4});
    for (Index c = 0; c < 12; ++c)
      for (Index t = 0; t < 6; ++t)
        for (Index v = 0; v < 4; ++v) same(0, c, t, v) = x(0, c, t, 0);
    fused.gamma.value() = T({4}, {0.5, -1.0, 2.0, 0.0});
    const T z = fused.branches_forward(V(same), false).value();
    identity(fused.output_proj);
    pass_through(fused.output_norm);
    const T y = fused(V(same), false).value();
    for (Index c = 0; c < 12; ++c)
      for (Index t = 0; t < 6; ++t)
        for (Index v = 0; v < 4; ++v)
          CHECK(y(0, c, t, v) == doctest::Approx((1 + fused.gamma.value()[v]) * z(0, c, t, 0)).epsilon(1e-10));
  }
  SUBCASE("sum equals D-JSF with gamma fixed at 1") {
    TemporalConfig sum = djsf;
    sum.fusion = FusionMode::sum;
    std::mt19937_64 r3(3);
    DgTcn<double> summed(12, 1, 4, sum, {}, r3);
    fused.gamma.value() = T({4}, 1.0);
    CHECK(summed.fixed_gamma == T({4}, 1.0));
    CHECK(summed(V(x), true).value() == fused(V(x), true).value());
  }
  SUBCASE("concat projects 2C channels back to C") {
    TemporalConfig cat = djsf;
    cat.fusion = FusionMode::concat;
    DgTcn<double> m(12, 2, 4, cat, {}, rng);
    CHECK(m.output_proj.in_channels() == 24);
    CHECK(m(V(x), true).shape() == Shape{2, 12, 3, 4});
  }
}

TEST_CASE("vanilla temporal module") {
  std::mt19937_64 rng(4);
  TemporalConfig tc;
  tc.mode = TemporalMode::vanilla;
  tc.fusion = FusionMode::off;
  DgTcn<double> m(3, 1, 2, tc, {}, rng);
  T &w = m.vanilla.weight.value();
  w.set_zero();
  for (Index i = 0; i < 3; ++i) w(i, i, 4) = 1;
  m.vanilla.bias.value().set_zero();
  pass_through(m.vanilla_norm);
  const T x = randn({1, 3, 10, 2}, rng);
  const T y = m(V(x), false).value();
  for (Index i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-12));
  DgTcn<double> strided(3, 2, 2, tc, {}, rng);
  CHECK(strided(V(x), false).shape() == Shape{1, 3, 5, 2});
  tc.fusion = FusionMode::djsf;
  CHECK_THROWS_AS(DgTcn<double>(3, 1, 2, tc, {}, rng), ConfigError);
}

TEST_CASE("concat fusion costs more than sum") {
  ModelConfig sum, cat;
  sum.temporal.fusion = FusionMode::sum;
  cat.temporal.fusion = FusionMode::concat;
  CHECK(count_flops(cat).total_flops > count_flops(sum).total_flops);
}
