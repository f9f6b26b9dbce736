#include <numeric>

#include "dgstgcn/gradcheck.hpp"
#include "dgstgcn/network.hpp"
#include "dgstgcn/ops.hpp"
#include "dgstgcn/skeleton.hpp"
#include "dgstgcn/verify/checks.hpp"
#include "support.hpp"

namespace dgstgcn::verify {

namespace {

using V64 = Var<double>;
using T64 = Tensor<double>;
using Op = std::function<V64(const std::vector<V64> &)>;

// Values bounded away from zero so ReLU kinks stay out of the stencil.
T64 away_from_zero(Shape shape, std::mt19937_64 &rng) {
  T64 t = randn(std::move(shape), rng);
  for (Index i = 0; i < t.size(); ++i) t[i] = (t[i] < 0 ? -0.1 : 0.1) + t[i];
  return t;
}

// Pairwise distinct values spaced by 0.05 so the window maxima are stable.
T64 distinct(Shape shape, std::mt19937_64 &rng) {
  T64 t(std::move(shape));
  std::vector<Index> order(static_cast<std::size_t>(t.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (Index i = 0; i < t.size(); ++i) t[i] = 0.05 * static_cast<double>(order[static_cast<std::size_t>(i)]);
  return t;
}

void check_op(CheckList &out, const std::string &name, const Op &op, const std::vector<T64> &inputs, double tol) {
  try {
    const GradCheckReport r = finite_diff_check(op, inputs);
    out.add("grad " + name, r.max_rel_error < tol, "max rel error " + fmt(r.max_rel_error));
  } catch (const std::exception &e) {
    out.add("grad " + name, false, e.what());
  }
}

} // namespace

CheckList operator_gradients() {
  CheckList out;
  std::mt19937_64 rng(11);
  const double tol = kOperatorGradTol;
  auto r = [&](Shape s, double scale = 1.0) { return randn(std::move(s), rng, scale); };

  check_op(out, "pointwise_conv", [](const auto &v) { return pointwise_conv(v[0], v[1], v[2]); },
           {r({2, 3, 4, 2}), r({4, 3}), r({4})}, tol);
  check_op(out, "pointwise_conv affine", [](const auto &v) { return pointwise_conv(v[0], v[1]); },
           {r({3, 5}), r({2, 5})}, tol);
  for (Index d : {1, 2, 3})
    for (Index s : {1, 2})
      check_op(out, "temporal_conv d" + std::to_string(d) + " s" + std::to_string(s),
               [d, s](const auto &v) { return temporal_conv(v[0], v[1], v[2], d, s); },
               {r({2, 3, 7, 2}), r({2, 3, 3}), r({2})}, tol);
  check_op(out, "temporal_conv k9", [](const auto &v) { return temporal_conv(v[0], v[1], v[2], 1, 1); },
           {r({1, 2, 10, 2}), r({3, 2, 9}), r({3})}, tol);
  for (Index s : {1, 2})
    check_op(out, "temporal_max_pool s" + std::to_string(s),
             [s](const auto &v) { return temporal_max_pool(v[0], 3, s); }, {distinct({2, 2, 7, 3}, rng)}, tol);
  for (Index axis : {0, 1, 2})
    check_op(out, "softmax axis " + std::to_string(axis), [axis](const auto &v) { return softmax(v[0], axis); },
             {r({3, 4, 2})}, tol);
  check_op(out, "relu", [](const auto &v) { return relu(v[0]); }, {away_from_zero({3, 4}, rng)}, tol);
  check_op(out, "tanh", [](const auto &v) { return tanh(v[0]); }, {r({3, 4})}, tol);
  check_op(out, "add", [](const auto &v) { return add(v[0], v[1]); }, {r({2, 3}), r({2, 3})}, tol);
  for (Index axis : {1, 2, 3})
    check_op(out, "mean axis " + std::to_string(axis), [axis](const auto &v) { return mean(v[0], axis); },
             {r({2, 3, 4, 5})}, tol);
  check_op(out, "mean drop axis", [](const auto &v) { return mean(v[0], 1, false); }, {r({2, 3, 4})}, tol);
  check_op(out, "reshape", [](const auto &v) { return reshape(v[0], {6, 4}); }, {r({2, 3, 4})}, tol);
  check_op(out, "narrow", [](const auto &v) { return narrow(v[0], 1, 1, 2); }, {r({2, 4, 3})}, tol);
  check_op(out, "concat", [](const auto &v) { return concat<double>({v[0], v[1]}, 3); }, {r({2, 3, 4, 2}), r({2, 3, 4, 1})},
           tol);
  check_op(out, "expand", [](const auto &v) { return expand(v[0], 3, 4); }, {r({2, 3, 2, 1})}, tol);
  for (bool training : {true, false})
    check_op(out, std::string("batch_norm ") + (training ? "training" : "inference"),
             [training](const auto &v) {
               Tensor<double> m({3}), var({3}, 1.3);
               return batch_norm(v[0], v[1], v[2], m, var, {training, 1e-5, 0.1});
             },
             {r({2, 3, 4, 2}), r({3}), r({3})}, tol);
  check_op(out, "graph_mix shared", [](const auto &v) { return graph_mix(v[0], v[1], 2); },
           {r({2, 4, 3, 3}), r({2, 3, 3})}, tol);
  check_op(out, "graph_mix per sample", [](const auto &v) { return graph_mix(v[0], v[1], 2); },
           {r({2, 4, 3, 3}), r({2, 2, 3, 3})}, tol);
  check_op(out, "graph_mix per channel", [](const auto &v) { return graph_mix(v[0], v[1], 2); },
           {r({2, 4, 3, 3}), r({2, 2, 2, 3, 3})}, tol);
  check_op(out, "group_gram", [](const auto &v) { return group_gram(v[0], v[1]); }, {r({2, 2, 3, 4}), r({2, 2, 3, 4})},
           tol);
  check_op(out, "pairwise_difference", [](const auto &v) { return pairwise_difference(v[0], v[1]); },
           {r({2, 2, 3, 4}), r({2, 2, 3, 4})}, tol);
  check_op(out, "combine_coefficients all",
           [](const auto &v) { return combine_coefficients(v[0], v[1], v[2], v[3], v[4]); },
           {r({2, 3, 3}), r({2}), r({2, 2, 3, 3}), r({2}), r({2, 2, 2, 3, 3})}, tol);
  check_op(out, "combine_coefficients agnostic",
           [](const auto &v) { return combine_coefficients(v[0], v[1], v[2], V64{}, V64{}); },
           {r({2, 3, 3}), r({2}), r({2, 2, 3, 3})}, tol);
  check_op(out, "combine_coefficients specific",
           [](const auto &v) { return combine_coefficients(V64{}, V64{}, V64{}, v[0], v[1]); },
           {r({2}), r({2, 2, 2, 3, 3})}, tol);
  check_op(out, "joint_skeleton_fuse", [](const auto &v) { return joint_skeleton_fuse(v[0], v[1], v[2]); },
           {r({2, 3, 4, 5}), r({2, 3, 4, 1}), r({5})}, tol);
  check_op(out, "person_pool", [](const auto &v) { return person_pool(v[0], std::vector<double>{0.5, 0.5, 1.0, 0.0}, 2); },
           {r({4, 3})}, tol);
  check_op(out, "dropout",
           [](const auto &v) {
             std::mt19937_64 local(5);
             return dropout(v[0], 0.3, true, local);
           },
           {r({4, 6})}, tol);
  const T64 w = r({3, 4});
  check_op(out, "weighted_sum", [w](const auto &v) { return weighted_sum(v[0], w); }, {r({3, 4})}, tol);
  check_op(out, "cross_entropy", [](const auto &v) { return cross_entropy(v[0], {0, 2, 1}); }, {r({3, 4})}, tol);
  check_op(out, "focal_loss",
           [](const auto &v) { return focal_loss(v[0], {0, 2, 1}, {0.5, 1.5, 1.0, 1.0}, 2.0); }, {r({3, 4})}, tol);
  check_op(out, "tanh chain", [](const auto &v) { return tanh(tanh(v[0])); }, {r({5})}, 1e-6);
  return out;
}

namespace {

// Composed maps contain ReLU and max-pool kinks; a narrower stencil keeps
// perturbations from crossing them.
constexpr double kComposedStep = 1e-6;

template <typename Module>
void check_module(CheckList &out, const std::string &name, Module &module, const T64 &input,
                  const std::function<V64(Module &, const V64 &)> &forward) {
  ParamSink<double> sink;
  module.collect(sink, "m");
  std::vector<V64> leaves;
  for (auto &p : sink.params) leaves.push_back(p.param->var());
  const V64 x(input, true);
  leaves.push_back(x);
  try {
    const GradCheckReport r = finite_diff_check([&] { return forward(module, x); }, leaves, kComposedStep);
    out.add("grad " + name, r.max_rel_error < kComposedGradTol,
            "max rel error " + fmt(r.max_rel_error) + " over " + std::to_string(r.coordinates) + " coordinates");
  } catch (const std::exception &e) {
    out.add("grad " + name, false, e.what());
  }
}

} // namespace

CheckList composed_gradients() {
  CheckList out;
  std::mt19937_64 rng(23);
  {
    SpatialConfig sc;
    sc.groups = 2;
    DgGcn<double> g(3, 4, 4, sc, {}, {}, rng);
    ParamSink<double> sink;
    g.collect(sink, "m");
    randomize_state(sink, rng);
    check_module<DgGcn<double>>(out, "spatial module", g, randn({2, 3, 4, 4}, rng),
                                [](DgGcn<double> &m, const V64 &x) { return m(x, true); });
  }
  for (FusionMode fusion : {FusionMode::djsf, FusionMode::concat}) {
    TemporalConfig tc;
    tc.fusion = fusion;
    DgTcn<double> t(6, 2, 3, tc, {}, rng);
    ParamSink<double> sink;
    t.collect(sink, "m");
    randomize_state(sink, rng);
    check_module<DgTcn<double>>(out, "temporal module " + to_string(fusion), t, randn({2, 6, 6, 3}, rng),
                                [](DgTcn<double> &m, const V64 &x) { return m(x, true); });
  }

  ModelConfig cfg;
  cfg.n_blocks = 2;
  cfg.base_width = 8;
  cfg.downsample_blocks = {2};
  cfg.joints = 5;
  cfg.n_classes = 3;
  cfg.spatial.groups = 2;
  Model<double> model(cfg, 3);
  ParamSink<double> sink = model.inventory();
  randomize_state(sink, rng);
  const T64 batch = randn({2, 2, 3, 8, 5}, rng);
  std::vector<V64> leaves;
  for (auto &p : sink.params) leaves.push_back(p.param->var());
  try {
    const GradCheckReport r =
        finite_diff_check([&] { return cross_entropy(model.forward(batch, true), {0, 2}); }, leaves, kComposedStep);
    out.add("grad tiny model", r.max_rel_error < kComposedGradTol,
            "max rel error " + fmt(r.max_rel_error) + " over " + std::to_string(r.coordinates) + " coordinates");
  } catch (const std::exception &e) {
    out.add("grad tiny model", false, e.what());
  }
  return out;
}

} // namespace dgstgcn::verify
