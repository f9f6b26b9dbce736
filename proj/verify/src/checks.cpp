#include "dgstgcn/verify/checks.hpp"

#include <algorithm>

namespace dgstgcn::verify {

void CheckList::add(std::string name, bool passed, std::string detail) {
  items.push_back({std::move(name), passed, std::move(detail)});
}

void CheckList::append(const CheckList &other) { items.insert(items.end(), other.items.begin(), other.items.end()); }

bool CheckList::passed() const {
  return !items.empty() && std::all_of(items.begin(), items.end(), [](const CheckResult &c) { return c.passed; });
}

std::string CheckList::summary() const {
  for (const auto &c : items)
    if (!c.passed) return c.name + ": " + c.detail;
  if (items.empty()) return "no checks ran";
  return std::to_string(items.size()) + " checks";
}

const std::vector<Criterion> &acceptance_criteria() {
  static const std::vector<Criterion> all{
      {1, "parameter counts", 1.0, parameter_counts},
      {2, "FLOP ratios", 1.0, flop_ratios},
      {3, "gradient suite", 60.0,
       [] {
         CheckList c = operator_gradients();
         c.append(composed_gradients());
         return c;
       }},
      {4, "oracle equivalence", 30.0, [] { return oracle_equivalence(); }},
      {5, "coefficient invariants", 10.0, coefficient_invariants},
      {6, "uniform sampling", 10.0, [] { return sampling_properties(); }},
      {7, "training sanity", 600.0, training_sanity},
      {8, "ablation coverage", 300.0, ablation_coverage},
      {9, "reproducibility and round trips", 120.0, reproducibility},
  };
  return all;
}

} // namespace dgstgcn::verify
