#include <numeric>
#include <set>

#include "dgstgcn/dg_gcn.hpp"
#include "dgstgcn/ops.hpp"
#include "dgstgcn/skeleton.hpp"
#include "dgstgcn/verify/checks.hpp"
#include "support.hpp"

namespace dgstgcn::verify {

namespace {

using V64 = Var<double>;
using T64 = Tensor<double>;

T64 permute_joints(const T64 &x, const std::vector<Index> &perm) {
  T64 out(x.shape());
  const Index v = x.dim(-1), outer = x.size() / v;
  for (Index o = 0; o < outer; ++o)
    for (Index j = 0; j < v; ++j) out[o * v + j] = x[o * v + perm[static_cast<std::size_t>(j)]];
  return out;
}

} // namespace

CheckList coefficient_invariants() {
  CheckList out;
  std::mt19937_64 rng(41);
  double column_err = 0, ca_max = 0;
  for (int i = 0; i < 50; ++i) {
    const Index v = uniform_int(rng, 2, 9), cin = uniform_int(rng, 1, 6), k = uniform_int(rng, 1, 4);
    const CoefficientParams<double> coef = init_coefficients<double>(v, k, cin, k * uniform_int(rng, 1, 4),
                                                                     {true, true, true}, rng);
    const T64 x = randn({2, cin, uniform_int(rng, 1, 5), v}, rng);
    const DynamicTerms<double> terms = dynamic_terms(V64(x), coef, {true, true, true});
    const T64 &da = terms.agnostic.value();
    for (Index n = 0; n < 2; ++n)
      for (Index g = 0; g < k; ++g)
        for (Index q = 0; q < v; ++q) {
          double s = 0;
          for (Index p = 0; p < v; ++p) s += da(n, g, p, q);
          column_err = std::max(column_err, std::abs(s - 1.0));
        }
    const T64 &ca = terms.specific.value();
    for (Index j = 0; j < ca.size(); ++j) ca_max = std::max(ca_max, std::abs(ca[j]));
  }
  out.add("channel-agnostic columns sum to 1", column_err <= kInvariantTol, "max deviation " + fmt(column_err));
  out.add("channel-specific entries in (-1, 1)", ca_max < 1.0, "1 - max |entry| = " + fmt(1.0 - ca_max));

  double equi = 0;
  for (int i = 0; i < 20; ++i) {
    const Index v = uniform_int(rng, 2, 7), cin = uniform_int(rng, 1, 5);
    SpatialConfig sc;
    sc.groups = uniform_int(rng, 1, 3);
    sc.mask = {true, i % 2 == 0 || i % 3 == 0, i % 2 == 1 || i % 3 == 0};
    DgGcn<double> g(cin, sc.groups * 2, v, sc, {}, {}, rng);
    ParamSink<double> sink;
    g.collect(sink, "m");
    randomize_state(sink, rng);
    const T64 x = randn({2, cin, 3, v}, rng);
    std::vector<Index> perm(static_cast<std::size_t>(v));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    DgGcn<double> h = g;
    const T64 &pa = g.coef.static_term.value();
    T64 &conj = h.coef.static_term.value();
    for (Index kk = 0; kk < sc.groups; ++kk)
      for (Index p = 0; p < v; ++p)
        for (Index q = 0; q < v; ++q)
          conj(kk, p, q) = pa(kk, perm[static_cast<std::size_t>(p)], perm[static_cast<std::size_t>(q)]);
    for (bool training : {false, true}) {
      DgGcn<double> g_run = g, h_run = h;
      const T64 expected = permute_joints(g_run(V64(x), training).value(), perm);
      const T64 got = h_run(V64(permute_joints(x, perm)), training).value();
      equi = std::max(equi, max_abs_diff(got, expected));
    }
  }
  out.add("joint-permutation equivariance", equi <= kInvariantTol, "max abs diff " + fmt(equi));
  return out;
}

CheckList sampling_properties(int pairs) {
  CheckList out;
  std::mt19937_64 rng(53);
  std::string violation;
  for (int i = 0; i < pairs && violation.empty(); ++i) {
    const Index t = uniform_int(rng, 1, 300), n = uniform_int(rng, 1, 128);
    const std::vector<Index> idx = uniform_sample(t, n, rng);
    if (static_cast<Index>(idx.size()) != n) violation = "wrong length";
    for (Index j = 0; j < n && violation.empty(); ++j) {
      const Index lo = j * t / n, hi = (j + 1) * t / n;
      const Index got = idx[static_cast<std::size_t>(j)];
      const bool ok = lo < hi ? (got >= lo && got < hi) : got == std::clamp<Index>(lo, 0, t - 1);
      if (!ok || (j > 0 && got < idx[static_cast<std::size_t>(j - 1)]))
        violation = "T=" + std::to_string(t) + " N=" + std::to_string(n) + " slot " + std::to_string(j);
    }
  }
  out.add("index lies in its substring", violation.empty(), violation);

  bool identity = true;
  for (Index t = 1; t <= 200; ++t) {
    const std::vector<Index> idx = uniform_sample(t, t, rng);
    for (Index j = 0; j < t; ++j) identity = identity && idx[static_cast<std::size_t>(j)] == j;
  }
  out.add("T = N gives the identity", identity);

  const Index n = 16, t = 2 * n;
  std::set<std::vector<Index>> sampled, cropped;
  for (int i = 0; i < 10000; ++i) {
    sampled.insert(uniform_sample(t, n, rng));
    cropped.insert(crop_indices(random_crop_window(t, 0.5, 1.0, rng), n));
  }
  out.add("uniform sampling more diverse than random crop", sampled.size() > cropped.size(),
          std::to_string(sampled.size()) + " vs " + std::to_string(cropped.size()) + " distinct tuples");
  return out;
}

} // namespace dgstgcn::verify
