#include <doctest.h>

#include <cmath>
#include <random>

#include "dgstgcn/network.hpp"

using namespace dgstgcn;
using T = Tensor<double>;

namespace {

T randn(Shape s, std::mt19937_64 &rng) {
  std::normal_distribution<double> n;
  T t(std::move(s));
  for (Index i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_blocks = 2;
  c.base_width = 8;
  c.downsample_blocks = {2};
  c.joints = 5;
  c.n_classes = 3;
  c.spatial.groups = 2;
  return c;
}

bool ends_with(const std::string &s, const std::string &suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

double loss_of(Model<double> &m, const T &batch, const std::vector<int> &labels, bool training) {
  return cross_entropy(m.forward(batch, training), labels).value()[0];
}

} // namespace

TEST_CASE("default widths") {
  const ModelConfig c;
  const auto plan = c.block_plan();
  REQUIRE(plan.size() == 10);
  std::vector<Index> widths;
  for (const auto &b : plan) widths.push_back(b.out_channels);
  CHECK(widths == std::vector<Index>{64, 64, 64, 64, 128, 128, 128, 256, 256, 256});
  CHECK(plan[4].stride == 2);
  CHECK(plan[7].stride == 2);
  CHECK(plan[1].stride == 1);
}

TEST_CASE("single block model runs") {
  ModelConfig c = tiny_config();
  c.n_blocks = 1;
  c.downsample_blocks = {};
  Model<double> m(c, 1);
  std::mt19937_64 rng(1);
  const auto y = m.forward(randn({2, 2, 3, 6, 5}, rng), true);
  CHECK(y.shape() == Shape{2, 3});
  CHECK(y.value().all_finite());
}

TEST_CASE("construction is deterministic per seed") {
  Model<double> a(tiny_config(), 9), b(tiny_config(), 9), c(tiny_config(), 10);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  REQUIRE(pa.size() == pb.size());
  bool any_differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].param->value() == pb[i].param->value());
    any_differs = any_differs || !(pa[i].param->value() == pc[i].param->value());
  }
  CHECK(any_differs);
}

TEST_CASE("zero input yields the classifier bias") {
  Model<double> m(tiny_config(), 2);
  T &bias = m.head.bias.value();
  bias[0] = 0.3;
  bias[1] = -1.2;
  bias[2] = 2.0;
  for (bool training : {false, true}) {
    const auto y = m.forward(T({3, 2, 3, 8, 5}), training);
    REQUIRE(y.shape() == Shape{3, 3});
    for (Index n = 0; n < 3; ++n)
      for (Index k = 0; k < 3; ++k) CHECK(y.value()(n, k) == doctest::Approx(bias[k]).epsilon(1e-12));
  }
}

TEST_CASE("duplicated sample gives duplicated logits in inference") {
  Model<double> m(tiny_config(), 3);
  std::mt19937_64 rng(3);
  const T one = randn({1, 2, 3, 8, 5}, rng);
  const T other = randn({1, 2, 3, 8, 5}, rng);
  T batch({3, 2, 3, 8, 5});
  const Index per = one.size();
  batch.data().segment(0, per) = one.data();
  batch.data().segment(per, per) = other.data();
  batch.data().segment(2 * per, per) = one.data();
  const T y = m.forward(batch, false).value();
  const T single = m.forward(one, false).value();
  for (Index k = 0; k < 3; ++k) {
    CHECK(y(0, k) == y(2, k));
    CHECK(y(0, k) == doctest::Approx(single(0, k)).epsilon(1e-12));
  }
}

TEST_CASE("absent persons are left out of the average") {
  Model<double> m(tiny_config(), 4);
  std::mt19937_64 rng(4);
  const T person = randn({1, 1, 3, 8, 5}, rng);
  T masked({1, 2, 3, 8, 5}), doubled({1, 2, 3, 8, 5});
  const Index per = person.size();
  masked.data().segment(0, per) = person.data();
  doubled.data().segment(0, per) = person.data();
  doubled.data().segment(per, per) = person.data();
  const T a = m.forward(masked, false).value(), b = m.forward(doubled, false).value();
  for (Index k = 0; k < 3; ++k) CHECK(a(0, k) == doctest::Approx(b(0, k)).epsilon(1e-12));
  CHECK(person_weights(masked) == std::vector<double>{1.0, 0.0});
  CHECK(person_weights(T({1, 2, 3, 8, 5})) == std::vector<double>{0.5, 0.5});
}

TEST_CASE("zeroed block is the identity") {
  ModelConfig c = tiny_config();
  c.n_blocks = 3;
  c.downsample_blocks = {3};
  Model<double> m(c, 5);
  Block<double> &b = m.blocks[1];
  REQUIRE(!b.projected);
  ParamSink<double> sink;
  b.collect(sink, "b");
  for (auto &p : sink.params)
    if (!ends_with(p.name, ".scale")) p.param->value().set_zero();
  std::mt19937_64 rng(5);
  T x = randn({2, 8, 6, 5}, rng);
  x.data() = x.data().cwiseAbs();
  for (bool training : {false, true}) CHECK(max_abs_diff(b(Var<double>(x), training).value(), x) == 0.0);
}

TEST_CASE("every parameter receives a gradient") {
  Model<double> m(tiny_config(), 6);
  std::mt19937_64 rng(6);
  for (auto &p : m.parameters())
    if (ends_with(p.name, ".alpha") || ends_with(p.name, ".beta") || ends_with(p.name, ".gamma"))
      p.param->value() = randn(p.param->value().shape(), rng);
  backward(cross_entropy(m.forward(randn({2, 2, 3, 8, 5}, rng), true), {0, 2}));
  for (auto &p : m.parameters()) {
    // Every bias except the head's feeds a batch norm, which cancels it in training mode.
    if (ends_with(p.name, ".bias") && p.name != "head.bias") continue;
    INFO(p.name);
    CHECK(p.param->grad().data().cwiseAbs().maxCoeff() > 1e-8);
  }
}

TEST_CASE("small step decreases the loss of its batch") {
  Model<double> m(tiny_config(), 7);
  std::mt19937_64 rng(7);
  const T x = randn({1, 2, 3, 8, 5}, rng);
  const double before = loss_of(m, x, {1}, true);
  backward_and_step(m, cross_entropy(m.forward(x, true), {1}), SgdOptions{1e-3, 0.0, 0.0});
  CHECK(loss_of(m, x, {1}, true) < before);
}

TEST_CASE("loss does not depend on batch order") {
  Model<double> m(tiny_config(), 8);
  std::mt19937_64 rng(8);
  const T x = randn({3, 2, 3, 8, 5}, rng);
  T permuted(x.shape());
  const Index per = x.size() / 3;
  const std::vector<Index> order{2, 0, 1};
  for (Index i = 0; i < 3; ++i) permuted.data().segment(i * per, per) = x.data().segment(order[i] * per, per);
  const std::vector<int> labels{0, 1, 2};
  const std::vector<int> permuted_labels{2, 0, 1};
  CHECK(loss_of(m, x, labels, false) == doctest::Approx(loss_of(m, permuted, permuted_labels, false)).epsilon(1e-12));
}

TEST_CASE("non-finite activations name the block") {
  Model<double> m(tiny_config(), 9);
  m.parameters().front().param->value()[0] = NAN;
  std::mt19937_64 rng(9);
  try {
    m.forward(randn({1, 2, 3, 8, 5}, rng), true);
    FAIL("expected NumericalError");
  } catch (const NumericalError &e) {
    CHECK(std::string(e.what()).find("block 1") != std::string::npos);
  }
  CHECK_THROWS_AS(backward_and_step(m, Var<double>(T::scalar(NAN)), SgdOptions{}), NumericalError);
}

TEST_CASE("rejects malformed input shapes") {
  Model<double> m(tiny_config(), 10);
  CHECK_THROWS_AS(m.forward(T({1, 2, 3, 8}), false), DimensionError);
  CHECK_THROWS_AS(m.forward(T({1, 2, 3, 8, 4}), false), DimensionError);
  ModelConfig bad = tiny_config();
  bad.spatial.groups = 9;
  CHECK_THROWS_AS(Model<double>(bad, 0), ConfigError);
}

TEST_CASE("checkpoint round trip and rejection") {
  Model<float> m(tiny_config(), 11);
  const std::string bytes = encode_checkpoint(m);
  Model<float> back = decode_checkpoint<float>(bytes);
  CHECK(encode_checkpoint(back) == bytes);
  auto pa = m.parameters(), pb = back.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].param->value() == pb[i].param->value());

  std::string renamed = bytes;
  const auto at = renamed.find("head.bias");
  REQUIRE(at != std::string::npos);
  renamed[at + 5] = 'x';
  CHECK_THROWS_AS(decode_checkpoint<float>(renamed), FormatError);
  CHECK_THROWS_AS(decode_checkpoint<float>(bytes.substr(0, bytes.size() - 3)), FormatError);
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint<float>(magic), FormatError);
}
