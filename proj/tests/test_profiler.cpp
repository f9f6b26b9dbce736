#include <doctest.h>

#include <random>

#include "dgstgcn/profiler.hpp"

using namespace dgstgcn;
using T = Tensor<double>;

namespace {

ModelConfig static_only(TemporalMode mode, FusionMode fusion) {
  ModelConfig c;
  c.spatial.mask = {true, false, false};
  c.temporal.mode = mode;
  c.temporal.fusion = fusion;
  return c;
}

double entry_sum(const std::vector<CostEntry> &entries, bool flops) {
  double s = 0;
  for (const auto &e : entries) s += flops ? e.flops : static_cast<double>(e.params);
  return s;
}

} // namespace

TEST_CASE("affine layer count") {
  std::mt19937_64 rng(1);
  PointwiseConv<double> affine(2, 4, true, rng);
  ParamSink<double> sink;
  affine.collect(sink, "affine");
  Index n = 0;
  for (auto &p : sink.params) n += p.param->size();
  CHECK(n == 12);

  ModelConfig c;
  c.n_blocks = 1;
  c.downsample_blocks = {};
  c.base_width = 8;
  c.n_classes = 5;
  c.spatial.groups = 2;
  Model<float> m(c, 0);
  const CostReport r = count_params(m);
  REQUIRE(r.entries.back().name == "head");
  CHECK(r.entries.back().params == 8 * 5 + 5);
}

TEST_CASE("pointwise MAC count") {
  std::mt19937_64 rng(2);
  PointwiseConv<double> conv(2, 5, false, rng);
  MacCounter::reset();
  const auto y = conv(Var<double>(T({1, 2, 4, 3})));
  CHECK(y.shape() == Shape{1, 5, 4, 3});
  CHECK(MacCounter::value() == 5 * 2 * 4 * 3);
  CHECK(2 * MacCounter::value() == 240);
}

TEST_CASE("totals equal the sum of entries") {
  ModelConfig c;
  Model<float> m(c, 0);
  const CostReport walked = count_params(m);
  CHECK(walked.total_params == static_cast<std::uint64_t>(entry_sum(walked.entries, false)));
  const CostReport closed = count_flops(c);
  CHECK(closed.total_params == walked.total_params);
  CHECK(closed.total_flops == doctest::Approx(entry_sum(closed.entries, true)));
  for (const auto &e : closed.entries)
    if (!e.children.empty()) CHECK(e.flops == doctest::Approx(entry_sum(e.children, true)));
  CHECK(walked.total_params == 1678166);
  const std::string table = format_table(closed);
  CHECK(table.find("head") != std::string::npos);
  CHECK(to_json(closed).at("assumptions").contains("persons"));
}

TEST_CASE("ratios do not depend on the convention") {
  const ModelConfig a = static_only(TemporalMode::vanilla, FusionMode::off);
  const ModelConfig b = static_only(TemporalMode::multi_group, FusionMode::off);
  FlopOptions mac, flop;
  mac.convention = FlopConvention::mac;
  flop.convention = FlopConvention::flop;
  CHECK(count_flops(a, flop).total_flops == doctest::Approx(2 * count_flops(a, mac).total_flops));
  CHECK(count_flops(a, flop).total_flops / count_flops(b, flop).total_flops ==
        doctest::Approx(count_flops(a, mac).total_flops / count_flops(b, mac).total_flops));
  FlopOptions inclusive = flop;
  inclusive.include_elementwise = true;
  CHECK(count_flops(b, inclusive).total_flops > count_flops(b, flop).total_flops);
}

TEST_CASE("absolute multiply-accumulates near the reported GFLOPs") {
  FlopOptions o;
  o.convention = FlopConvention::mac;
  const std::pair<ModelConfig, double> rows[] = {
      {static_only(TemporalMode::vanilla, FusionMode::off), 3.46},
      {static_only(TemporalMode::multi_group, FusionMode::off), 1.63},
      {static_only(TemporalMode::multi_group, FusionMode::concat), 1.94},
      {static_only(TemporalMode::multi_group, FusionMode::djsf), 1.65},
      {ModelConfig{}, 1.65},
  };
  for (const auto &[config, reported] : rows) {
    const double g = count_flops(config, o).total_flops / 1e9;
    INFO(to_string(config.temporal.mode) << " " << to_string(config.temporal.fusion) << ": " << g << "G vs "
                                         << reported);
    CHECK(std::abs(g - reported) <= 0.2 * reported);
  }
}

TEST_CASE("closed form matches recorded MACs") {
  ModelConfig c;
  c.n_blocks = 3;
  c.base_width = 8;
  c.downsample_blocks = {2};
  c.joints = 6;
  c.n_classes = 3;
  c.spatial.groups = 2;
  for (FusionMode fusion : {FusionMode::djsf, FusionMode::concat, FusionMode::off}) {
    c.temporal.fusion = fusion;
    Model<double> m(c, 1);
    MacCounter::reset();
    m.forward(T({2, 2, 3, 10, 6}, 0.5), false);
    CHECK(MacCounter::value() == forward_macs(c, 2, 2, 10));
  }
}

TEST_CASE("parameter count equals the scalars one step updates") {
  ModelConfig c;
  c.n_blocks = 3;
  c.base_width = 8;
  c.downsample_blocks = {3};
  c.joints = 6;
  c.n_classes = 3;
  c.spatial.groups = 2;
  Model<double> m(c, 2);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  for (auto &p : m.parameters())
    for (Index i = 0; i < p.param->size(); ++i) p.param->value()[i] += 0.1 * normal(rng);
  std::vector<T> before;
  for (auto &p : m.parameters()) before.push_back(p.param->value());
  T x({2, 2, 3, 8, 6});
  for (Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
  backward_and_step(m, cross_entropy(m.forward(x, true), {0, 1}), SgdOptions{});
  std::uint64_t updated = 0;
  const auto params = m.parameters();
  for (std::size_t k = 0; k < params.size(); ++k)
    updated += static_cast<std::uint64_t>((params[k].param->value().data().array() != before[k].data().array()).count());
  CHECK(updated == count_params(m).total_params);
}
