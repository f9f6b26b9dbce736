#pragma once

#include <functional>
#include <string>
#include <vector>

namespace dgstgcn::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckList {
  std::vector<CheckResult> items;

  void add(std::string name, bool passed, std::string detail = {});
  void append(const CheckList &other);
  bool passed() const;
  /// First failing item's name and detail, or a count of passes.
  std::string summary() const;
};

// Tolerances shared by the suites and the acceptance binary.
inline constexpr double kOperatorGradTol = 1e-5;
inline constexpr double kComposedGradTol = 1e-4;
inline constexpr double kSpatialOracleTol = 1e-5;
inline constexpr double kFusionOracleTol = 1e-6;
inline constexpr double kInvariantTol = 1e-6;

/// Finite-difference check of every differentiable operator (64-bit).
CheckList operator_gradients();
/// Spatial module, temporal module and a 2-block model (V=5, T=8).
CheckList composed_gradients();
/// Primitive oracles plus spatial / temporal module oracles on random instances.
CheckList oracle_equivalence(int spatial_instances = 100, int temporal_instances = 60);
/// Softmax column sums, CA range, joint-permutation equivariance.
CheckList coefficient_invariants();
/// Index-in-substring, identity at T = N, sampling diversity.
CheckList sampling_properties(int pairs = 10000);
/// Parameter and FLOP figures.
CheckList parameter_counts();
CheckList flop_ratios();
/// Same-seed checkpoints and SKL1 / DGW1 / SCR1 round trips.
CheckList reproducibility();
/// Every spatial mode, component mask and temporal mode trains one epoch and profiles.
CheckList ablation_coverage();
/// Desk-preset overfit on 4 x 64 synthetic samples.
CheckList training_sanity();

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<CheckList()> run;
};

const std::vector<Criterion> &acceptance_criteria();

} // namespace dgstgcn::verify
