#include "dgstgcn/profiler.hpp"

#include <iomanip>
#include <map>
#include <sstream>

namespace dgstgcn {

using nlohmann::json;

template <typename Scalar>
CostReport count_params(Model<Scalar> &model) {
  CostReport r;
  std::map<std::string, CostEntry> top;
  std::vector<std::string> order;
  for (const auto &p : model.parameters()) {
    // names look like blocks.<i>.<module>.<...> or head.<...>
    const std::string &name = p.name;
    std::string group, module;
    if (name.rfind("blocks.", 0) == 0) {
      const auto second = name.find('.', 7);
      group = name.substr(0, second);
      const auto third = name.find('.', second + 1);
      module = name.substr(second + 1, third - second - 1);
    } else {
      group = name.substr(0, name.find('.'));
      module = group;
    }
    if (!top.count(group)) {
      top[group].name = group;
      order.push_back(group);
    }
    CostEntry &g = top[group];
    const auto n = static_cast<std::uint64_t>(p.param->size());
    g.params += n;
    auto it = std::find_if(g.children.begin(), g.children.end(), [&](const CostEntry &c) { return c.name == module; });
    if (it == g.children.end()) {
      g.children.push_back({module, 0, 0, {}});
      it = g.children.end() - 1;
    }
    it->params += n;
    r.total_params += n;
  }
  for (const auto &g : order) r.entries.push_back(top[g]);
  r.assumptions = {{"source", "parameter inventory walk"}};
  return r;
}

namespace {

struct ModuleCost {
  double params = 0;
  double macs = 0;        // per person
  double elementwise = 0; // per person
};

double conv_params(Index in, Index out, Index kernel) { return static_cast<double>(in * out * kernel + out); }
double norm_params(Index c) { return 2.0 * static_cast<double>(c); }

ModuleCost spatial_cost(const ModelConfig &cfg, const BlockShape &s, Index frames) {
  const double v = static_cast<double>(cfg.joints), t = static_cast<double>(frames);
  const Index k = cfg.spatial.groups;
  const Index inner = k * (s.out_channels / k);
  const double g = static_cast<double>(inner), cin = static_cast<double>(s.in_channels),
               c = static_cast<double>(s.out_channels);
  ModuleCost m;
  m.params = conv_params(s.in_channels, inner, 1) + norm_params(inner) + conv_params(inner, s.out_channels, 1) +
             norm_params(s.out_channels);
  m.macs = cin * g * t * v + g * t * v * v + g * c * t * v;
  m.elementwise = 2 * g * t * v + 2 * c * t * v + c * t * v; // two norms, relu
  const ComponentMask &mask = cfg.spatial.mask;
  switch (cfg.spatial.mode) {
  case SpatialMode::fixed_topology:
    break;
  case SpatialMode::refined_topology:
    m.params += static_cast<double>(k) * v * v;
    break;
  case SpatialMode::from_scratch:
    if (mask.pa) m.params += static_cast<double>(k) * v * v;
    if (mask.dynamic()) {
      m.params += 2 * conv_params(s.in_channels, inner, 1);
      m.macs += 2 * cin * g * v;
      m.elementwise += cin * t * v; // temporal mean
    }
    if (mask.da) {
      m.params += static_cast<double>(k);
      m.macs += g * v * v;
      m.elementwise += 3 * static_cast<double>(k) * v * v + 2 * static_cast<double>(k) * v * v;
    }
    if (mask.ca) {
      m.params += static_cast<double>(k);
      m.elementwise += 2 * g * v * v + 2 * g * v * v;
    }
    break;
  }
  return m;
}

ModuleCost temporal_cost(const ModelConfig &cfg, const BlockShape &s, Index frames) {
  const TemporalConfig &tc = cfg.temporal;
  const Index c = s.out_channels;
  const Index out_frames = (frames + s.stride - 1) / s.stride;
  const double v = static_cast<double>(cfg.joints), t = static_cast<double>(frames), to = static_cast<double>(out_frames);
  const double cd = static_cast<double>(c);
  ModuleCost m;
  if (tc.mode == TemporalMode::vanilla) {
    m.params = conv_params(c, c, tc.vanilla_kernel) + norm_params(c);
    m.macs = cd * cd * static_cast<double>(tc.vanilla_kernel) * to * v;
    m.elementwise = 2 * cd * to * v;
    return m;
  }
  const double cols = tc.fusion == FusionMode::off ? v : v + 1;
  m.params = conv_params(c, c, 1) + norm_params(c);
  m.macs = cd * cd * t * cols;
  m.elementwise = (2 + (tc.inner_relu ? 1 : 0)) * cd * t * cols;
  const auto widths = branch_widths(c, tc.branches);
  for (std::size_t i = 0; i < tc.branches.size(); ++i) {
    const Branch &b = tc.branches[i];
    const double w = static_cast<double>(widths[i]);
    if (b.kind == BranchKind::max_pool) {
      m.elementwise += w * to * cols * static_cast<double>(b.kernel);
      continue;
    }
    const Index kernel = b.kind == BranchKind::pointwise ? 1 : b.kernel;
    m.params += conv_params(widths[i], widths[i], kernel) + norm_params(widths[i]);
    m.macs += w * w * static_cast<double>(kernel) * to * cols;
    m.elementwise += 2 * w * to * cols;
  }
  const Index fused = tc.fusion == FusionMode::concat ? 2 * c : c;
  if (tc.fusion == FusionMode::djsf) m.params += v;
  if (tc.fusion != FusionMode::off) m.elementwise += cd * t * v + 2 * cd * to * v; // skeleton mean, fusion
  m.params += conv_params(fused, c, 1) + norm_params(c);
  m.macs += static_cast<double>(fused) * cd * to * v;
  m.elementwise += 2 * cd * to * v;
  return m;
}

ModuleCost residual_cost(const ModelConfig &cfg, const BlockShape &s, Index frames) {
  ModuleCost m;
  const Index out_frames = (frames + s.stride - 1) / s.stride;
  const double area = static_cast<double>(out_frames * cfg.joints);
  if (s.in_channels != s.out_channels || s.stride != 1) {
    m.params = conv_params(s.in_channels, s.out_channels, 1) + norm_params(s.out_channels);
    m.macs = static_cast<double>(s.in_channels * s.out_channels) * area;
    m.elementwise = 2 * static_cast<double>(s.out_channels) * area;
  }
  m.elementwise += 2 * static_cast<double>(s.out_channels) * area; // add, relu
  return m;
}

} // namespace

CostReport count_flops(const ModelConfig &config, const FlopOptions &opts) {
  config.validate();
  if (opts.frames < 1 || opts.persons < 1) throw ConfigError("flop accounting needs frames >= 1 and persons >= 1");
  const double per_mac = opts.convention == FlopConvention::flop ? 2.0 : 1.0;
  const double persons = static_cast<double>(opts.persons);
  auto flops_of = [&](const ModuleCost &m) {
    return persons * (per_mac * m.macs + (opts.include_elementwise ? m.elementwise : 0.0));
  };

  CostReport r;
  Index frames = opts.frames;
  Index idx = 1;
  for (const BlockShape &s : config.block_plan()) {
    CostEntry block{"blocks." + std::to_string(idx++), 0, 0, {}};
    const std::pair<const char *, ModuleCost> parts[] = {{"spatial", spatial_cost(config, s, frames)},
                                                         {"temporal", temporal_cost(config, s, frames)},
                                                         {"residual", residual_cost(config, s, frames)}};
    for (const auto &[name, cost] : parts) {
      if (cost.params == 0 && cost.macs == 0 && !opts.include_elementwise) continue;
      CostEntry e{name, static_cast<std::uint64_t>(cost.params), flops_of(cost), {}};
      block.params += e.params;
      block.flops += e.flops;
      block.children.push_back(e);
    }
    r.entries.push_back(block);
    frames = (frames + s.stride - 1) / s.stride;
  }
  const Index width = config.block_plan().back().out_channels;
  CostEntry head{"head", static_cast<std::uint64_t>(conv_params(width, config.n_classes, 1)), 0, {}};
  if (opts.include_head) head.flops = per_mac * static_cast<double>(width * config.n_classes);
  r.entries.push_back(head);
  for (const auto &e : r.entries) {
    r.total_params += e.params;
    r.total_flops += e.flops;
  }
  r.assumptions = {{"frames", opts.frames},
                   {"joints", config.joints},
                   {"in_channels", config.in_channels},
                   {"persons", opts.persons},
                   {"convention", opts.convention == FlopConvention::flop ? "2 FLOPs per multiply-accumulate"
                                                                          : "1 FLOP per multiply-accumulate"},
                   {"elementwise", opts.include_elementwise},
                   {"head", opts.include_head},
                   {"source", "closed form"}};
  return r;
}

std::uint64_t forward_macs(const ModelConfig &config, Index batch, Index persons, Index frames) {
  FlopOptions o;
  o.frames = frames;
  o.persons = persons;
  o.convention = FlopConvention::mac;
  o.include_head = false;
  const CostReport r = count_flops(config, o);
  const Index width = config.block_plan().back().out_channels;
  return static_cast<std::uint64_t>(std::llround(r.total_flops)) * static_cast<std::uint64_t>(batch) +
         static_cast<std::uint64_t>(batch * width * config.n_classes);
}

namespace {

json entry_json(const CostEntry &e) {
  json j{{"name", e.name}, {"params", e.params}, {"flops", e.flops}};
  if (!e.children.empty()) {
    j["modules"] = json::array();
    for (const auto &c : e.children) j["modules"].push_back(entry_json(c));
  }
  return j;
}

} // namespace

json to_json(const CostReport &r) {
  json j{{"total_params", r.total_params}, {"total_flops", r.total_flops}, {"assumptions", r.assumptions}};
  j["entries"] = json::array();
  for (const auto &e : r.entries) j["entries"].push_back(entry_json(e));
  return j;
}

std::string format_table(const CostReport &r) {
  std::ostringstream out;
  auto row = [&](const std::string &name, std::uint64_t params, double flops) {
    out << std::left << std::setw(22) << name << std::right << std::setw(14) << params << std::setw(16) << std::fixed
        << std::setprecision(4) << flops / 1e9 << "\n";
  };
  out << std::left << std::setw(22) << "module" << std::right << std::setw(14) << "params" << std::setw(16) << "GFLOPs"
      << "\n";
  for (const auto &e : r.entries) {
    row(e.name, e.params, e.flops);
    for (const auto &c : e.children) row("  " + c.name, c.params, c.flops);
  }
  row("total", r.total_params, r.total_flops);
  for (const auto &[k, v] : r.assumptions.items()) out << "# " << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
  return out.str();
}

template CostReport count_params<float>(Model<float> &);
template CostReport count_params<double>(Model<double> &);

} // namespace dgstgcn
