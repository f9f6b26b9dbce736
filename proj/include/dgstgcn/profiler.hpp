#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgstgcn/config.hpp"
#include "dgstgcn/network.hpp"

namespace dgstgcn {

/// mac: one multiply-accumulate counts once; flop: twice.
enum class FlopConvention { mac, flop };

struct FlopOptions {
  Index frames = 64;
  Index persons = 2;
  FlopConvention convention = FlopConvention::flop;
  bool include_elementwise = false; // normalization, activations, softmax, additions
  bool include_head = true;
};

struct CostEntry {
  std::string name;
  std::uint64_t params = 0;
  double flops = 0;
  std::vector<CostEntry> children;
};

struct CostReport {
  std::uint64_t total_params = 0;
  double total_flops = 0;
  std::vector<CostEntry> entries; // blocks, then the head
  nlohmann::json assumptions;
};

/// Exhaustive walk over the model's parameter inventory, grouped by block and module.
template <typename Scalar>
CostReport count_params(Model<Scalar> &model);

/// Closed-form parameter and FLOP accounting for one sample of
/// `opts.persons` persons and `opts.frames` frames.
CostReport count_flops(const ModelConfig &config, const FlopOptions &opts = {});

/// Closed-form multiply-accumulates of one forward pass over a [N, M, C, T, V]
/// batch, as recorded by MacCounter.
std::uint64_t forward_macs(const ModelConfig &config, Index batch, Index persons, Index frames);

nlohmann::json to_json(const CostReport &r);
std::string format_table(const CostReport &r);

} // namespace dgstgcn
