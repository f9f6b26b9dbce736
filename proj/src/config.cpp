#include "dgstgcn/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "dgstgcn/error.hpp"

namespace dgstgcn {

using nlohmann::json;

std::vector<Branch> default_branches() {
  return {{BranchKind::conv, 3, 1, 0},     {BranchKind::conv, 3, 2, 0},    {BranchKind::conv, 3, 3, 0},
          {BranchKind::conv, 3, 4, 0},     {BranchKind::max_pool, 3, 1, 0}, {BranchKind::pointwise, 1, 1, 0}};
}

std::vector<Index> branch_widths(Index channels, const std::vector<Branch> &branches) {
  if (branches.empty()) throw ConfigError("temporal module needs at least one branch");
  const bool all_auto = std::all_of(branches.begin(), branches.end(), [](const Branch &b) { return b.width == 0; });
  const bool all_set = std::all_of(branches.begin(), branches.end(), [](const Branch &b) { return b.width > 0; });
  if (!all_auto && !all_set) throw ConfigError("branch widths must be all set or all derived");
  std::vector<Index> widths;
  if (all_set) {
    Index total = 0;
    for (const auto &b : branches) {
      widths.push_back(b.width);
      total += b.width;
    }
    if (total != channels)
      throw ConfigError("branch widths sum to " + std::to_string(total) + " but the module has " +
                        std::to_string(channels) + " channels");
    return widths;
  }
  const auto n = static_cast<Index>(branches.size());
  const Index each = channels / n;
  if (each < 1)
    throw ConfigError(std::to_string(channels) + " channels cannot feed " + std::to_string(n) + " temporal branches");
  widths.assign(branches.size(), each);
  std::size_t sink = branches.size() - 1;
  for (std::size_t i = branches.size(); i-- > 0;)
    if (branches[i].kind == BranchKind::pointwise) {
      sink = i;
      break;
    }
  widths[sink] += channels - each * n;
  return widths;
}

std::string ComponentMask::to_string() const {
  std::string out;
  auto add = [&](bool on, const char *name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(pa, "pa");
  add(da, "da");
  add(ca, "ca");
  return out.empty() ? "none" : out;
}

ComponentMask ComponentMask::parse(const std::string &text) {
  ComponentMask m{false, false, false};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '+')) {
    if (item == "pa")
      m.pa = true;
    else if (item == "da")
      m.da = true;
    else if (item == "ca")
      m.ca = true;
    else
      throw ConfigError("unknown coefficient component '" + item + "' (expected pa, da, ca)");
  }
  return m;
}

std::vector<BlockShape> ModelConfig::block_plan() const {
  std::vector<BlockShape> plan;
  Index in = in_channels, width = base_width;
  for (Index b = 1; b <= n_blocks; ++b) {
    const bool down = std::find(downsample_blocks.begin(), downsample_blocks.end(), b) != downsample_blocks.end();
    if (down) width *= 2;
    plan.push_back({in, width, down ? 2 : 1});
    in = width;
  }
  return plan;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string &m) { throw ConfigError(m); };
  if (n_blocks < 1) fail("n_blocks must be >= 1");
  if (base_width < 1) fail("base_width must be >= 1");
  for (Index b : downsample_blocks)
    if (b < 1 || b > n_blocks) fail("downsample block " + std::to_string(b) + " outside 1.." + std::to_string(n_blocks));
  if (joints < 1 || in_channels < 1 || n_classes < 1 || persons < 1)
    fail("joints, in_channels, n_classes and persons must be positive");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
  if (norm.eps <= 0.0 || norm.momentum < 0.0 || norm.momentum > 1.0) fail("invalid batch-norm eps/momentum");

  const Index k = spatial.groups;
  if (k < 1) fail("spatial groups K must be >= 1");
  if (!spatial.mask.any()) fail("coefficient component mask is empty");
  if (spatial.mode != SpatialMode::from_scratch) {
    if (!(spatial.mask == ComponentMask{true, false, false}))
      fail(to_string(spatial.mode) + " replaces the static term with the skeleton topology; mask must be 'pa'");
    if (k != 1 && k != 3) fail(to_string(spatial.mode) + " needs K=1 (normalized adjacency) or K=3 (partitions)");
    if (bones.empty()) fail(to_string(spatial.mode) + " requires the dataset bone list");
    if (static_cast<Index>(bones.size()) != joints) fail("bone list must name every joint exactly once");
  }
  for (const auto &shape : block_plan())
    if (shape.out_channels < k)
      fail("block width " + std::to_string(shape.out_channels) + " is smaller than K=" + std::to_string(k));

  if (temporal.mode == TemporalMode::vanilla) {
    if (temporal.fusion != FusionMode::off) fail("joint-skeleton fusion requires the multi-group temporal module");
    if (temporal.vanilla_kernel < 1 || temporal.vanilla_kernel % 2 == 0) fail("vanilla temporal kernel must be odd");
  } else {
    for (const auto &b : temporal.branches) {
      if (b.kernel < 1 || b.kernel % 2 == 0) fail("temporal branch kernel must be odd");
      if (b.dilation < 1) fail("temporal branch dilation must be >= 1");
      if (b.kind == BranchKind::pointwise && b.kernel != 1) fail("pointwise branch must have kernel 1");
    }
    for (const auto &shape : block_plan()) branch_widths(shape.out_channels, temporal.branches);
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (lr < 0 || momentum < 0 || weight_decay < 0) throw ConfigError("lr, momentum and weight decay must be >= 0");
  if (augment.length < 1) throw ConfigError("augmentation target length must be >= 1");
  if (augment.pad_length < 1) throw ConfigError("padding length must be >= 1");
  if (!(augment.crop_min > 0 && augment.crop_min <= augment.crop_max && augment.crop_max <= 1.0))
    throw ConfigError("random-crop ratio range must satisfy 0 < min <= max <= 1");
  if (focal_gamma < 0) throw ConfigError("focal gamma must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

Preset preset(const std::string &name) {
  Preset p;
  if (name == "paper-ablation") {
    p.train.augment.length = 64;
    return p;
  }
  if (name == "paper-sota") {
    p.train.epochs = 150;
    p.train.augment.length = 100;
    return p;
  }
  if (name == "desk") {
    p.model.n_blocks = 4;
    p.model.base_width = 16;
    p.model.downsample_blocks = {3};
    p.model.spatial.groups = 4;
    p.model.n_classes = 4;
    p.train.epochs = 30;
    p.train.batch_size = 48;
    p.train.lr = 0.1;
    p.train.augment.length = 32;
    return p;
  }
  throw ConfigError("unknown preset '" + name + "' (expected paper-ablation, paper-sota or desk)");
}

std::vector<std::string> preset_names() { return {"paper-ablation", "paper-sota", "desk"}; }

// ---------------------------------------------------------------------------
// Enum names

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string &text, const std::pair<E, const char *> (&names)[N], const char *what) {
  for (const auto &[value, name] : names)
    if (text == name) return value;
  std::string options;
  for (const auto &[value, name] : names) options += std::string(options.empty() ? "" : ", ") + name;
  throw ConfigError(std::string("unknown ") + what + " '" + text + "' (expected " + options + ")");
}

template <typename E, std::size_t N>
std::string enum_name(E v, const std::pair<E, const char *> (&names)[N]) {
  for (const auto &[value, name] : names)
    if (value == v) return name;
  return "?";
}

const std::pair<SpatialMode, const char *> kSpatial[] = {{SpatialMode::fixed_topology, "fixed_topology"},
                                                        {SpatialMode::refined_topology, "refined_topology"},
                                                        {SpatialMode::from_scratch, "from_scratch"}};
const std::pair<TemporalMode, const char *> kTemporal[] = {{TemporalMode::vanilla, "vanilla"},
                                                          {TemporalMode::multi_group, "multi_group"}};
const std::pair<FusionMode, const char *> kFusion[] = {
    {FusionMode::off, "off"}, {FusionMode::djsf, "djsf"}, {FusionMode::concat, "concat"}, {FusionMode::sum, "sum"}};
const std::pair<BranchKind, const char *> kBranch[] = {
    {BranchKind::conv, "conv"}, {BranchKind::max_pool, "max_pool"}, {BranchKind::pointwise, "pointwise"}};
const std::pair<AugmentStrategy, const char *> kAugment[] = {{AugmentStrategy::none_pad, "none_pad"},
                                                            {AugmentStrategy::random_crop, "random_crop"},
                                                            {AugmentStrategy::uniform_sample, "uniform_sample"}};
const std::pair<LossKind, const char *> kLoss[] = {{LossKind::cross_entropy, "cross_entropy"},
                                                  {LossKind::class_balanced_focal, "class_balanced_focal"}};
const std::pair<Modality, const char *> kModality[] = {{Modality::joint, "joint"},
                                                      {Modality::bone, "bone"},
                                                      {Modality::joint_motion, "joint_motion"},
                                                      {Modality::bone_motion, "bone_motion"}};

} // namespace

std::string to_string(SpatialMode v) { return enum_name(v, kSpatial); }
std::string to_string(TemporalMode v) { return enum_name(v, kTemporal); }
std::string to_string(FusionMode v) { return enum_name(v, kFusion); }
std::string to_string(BranchKind v) { return enum_name(v, kBranch); }
std::string to_string(AugmentStrategy v) { return enum_name(v, kAugment); }
std::string to_string(LossKind v) { return enum_name(v, kLoss); }
std::string to_string(Modality v) { return enum_name(v, kModality); }
SpatialMode parse_spatial_mode(const std::string &s) { return parse_enum(s, kSpatial, "spatial mode"); }
TemporalMode parse_temporal_mode(const std::string &s) { return parse_enum(s, kTemporal, "temporal mode"); }
FusionMode parse_fusion_mode(const std::string &s) { return parse_enum(s, kFusion, "fusion mode"); }
AugmentStrategy parse_augment(const std::string &s) { return parse_enum(s, kAugment, "augmentation"); }
LossKind parse_loss(const std::string &s) { return parse_enum(s, kLoss, "loss"); }
Modality parse_modality(const std::string &s) { return parse_enum(s, kModality, "modality"); }

// ---------------------------------------------------------------------------
// JSON

namespace {

void reject_unknown(const json &j, std::initializer_list<const char *> allowed, const char *where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto &[key, value] : j.items())
    if (!keys.count(key)) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json &j, const char *key, T &out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

json branch_to_json(const Branch &b) {
  return {{"kind", to_string(b.kind)}, {"kernel", b.kernel}, {"dilation", b.dilation}, {"width", b.width}};
}

Branch branch_from_json(const json &j) {
  reject_unknown(j, {"kind", "kernel", "dilation", "width"}, "temporal.branches[]");
  Branch b;
  std::string kind = "conv";
  read(j, "kind", kind);
  b.kind = parse_enum(kind, kBranch, "branch kind");
  if (b.kind != BranchKind::conv) b.kernel = b.kind == BranchKind::pointwise ? 1 : 3;
  read(j, "kernel", b.kernel);
  read(j, "dilation", b.dilation);
  read(j, "width", b.width);
  return b;
}

} // namespace

void to_json(json &j, const ModelConfig &c) {
  json branches = json::array();
  for (const auto &b : c.temporal.branches) branches.push_back(branch_to_json(b));
  json bones = json::array();
  for (const auto &[child, parent] : c.bones) bones.push_back({child, parent});
  j = json{{"n_blocks", c.n_blocks},
           {"base_width", c.base_width},
           {"downsample_blocks", c.downsample_blocks},
           {"spatial", {{"mode", to_string(c.spatial.mode)}, {"mask", c.spatial.mask.to_string()}, {"groups", c.spatial.groups}}},
           {"temporal",
            {{"mode", to_string(c.temporal.mode)},
             {"fusion", to_string(c.temporal.fusion)},
             {"branches", branches},
             {"vanilla_kernel", c.temporal.vanilla_kernel},
             {"inner_relu", c.temporal.inner_relu}}},
           {"joints", c.joints},
           {"in_channels", c.in_channels},
           {"n_classes", c.n_classes},
           {"persons", c.persons},
           {"dropout", c.dropout},
           {"norm", {{"eps", c.norm.eps}, {"momentum", c.norm.momentum}}},
           {"bones", bones}};
}

ModelConfig merge_model_config(ModelConfig c, const json &j) {
  reject_unknown(j,
                 {"n_blocks", "base_width", "downsample_blocks", "spatial", "temporal", "joints", "in_channels",
                  "n_classes", "persons", "dropout", "norm", "bones"},
                 "model");
  read(j, "n_blocks", c.n_blocks);
  read(j, "base_width", c.base_width);
  read(j, "downsample_blocks", c.downsample_blocks);
  read(j, "joints", c.joints);
  read(j, "in_channels", c.in_channels);
  read(j, "n_classes", c.n_classes);
  read(j, "persons", c.persons);
  read(j, "dropout", c.dropout);
  if (j.contains("spatial")) {
    const json &s = j.at("spatial");
    reject_unknown(s, {"mode", "mask", "groups"}, "model.spatial");
    if (s.contains("mode")) c.spatial.mode = parse_spatial_mode(s.at("mode").get<std::string>());
    if (s.contains("mask")) c.spatial.mask = ComponentMask::parse(s.at("mask").get<std::string>());
    read(s, "groups", c.spatial.groups);
  }
  if (j.contains("temporal")) {
    const json &t = j.at("temporal");
    reject_unknown(t, {"mode", "fusion", "branches", "vanilla_kernel", "inner_relu"}, "model.temporal");
    if (t.contains("mode")) c.temporal.mode = parse_temporal_mode(t.at("mode").get<std::string>());
    if (t.contains("fusion")) c.temporal.fusion = parse_fusion_mode(t.at("fusion").get<std::string>());
    if (t.contains("branches")) {
      c.temporal.branches.clear();
      for (const auto &b : t.at("branches")) c.temporal.branches.push_back(branch_from_json(b));
    }
    read(t, "vanilla_kernel", c.temporal.vanilla_kernel);
    read(t, "inner_relu", c.temporal.inner_relu);
  }
  if (j.contains("norm")) {
    const json &n = j.at("norm");
    reject_unknown(n, {"eps", "momentum"}, "model.norm");
    read(n, "eps", c.norm.eps);
    read(n, "momentum", c.norm.momentum);
  }
  if (j.contains("bones")) {
    c.bones.clear();
    for (const auto &b : j.at("bones")) {
      if (!b.is_array() || b.size() != 2) throw ConfigError("model.bones entries must be [child, parent]");
      c.bones.emplace_back(b[0].get<int>(), b[1].get<int>());
    }
  }
  return c;
}

void from_json(const json &j, ModelConfig &c) { c = merge_model_config(ModelConfig{}, j); }

void to_json(json &j, const TrainConfig &c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"augment",
            {{"strategy", to_string(c.augment.strategy)},
             {"length", c.augment.length},
             {"crop_min", c.augment.crop_min},
             {"crop_max", c.augment.crop_max},
             {"pad_length", c.augment.pad_length}}},
           {"loss", to_string(c.loss)},
           {"focal_gamma", c.focal_gamma},
           {"modality", to_string(c.modality)},
           {"seed", c.seed},
           {"deterministic", c.deterministic},
           {"workers", c.workers}};
}

TrainConfig merge_train_config(TrainConfig c, const json &j) {
  reject_unknown(j,
                 {"epochs", "batch_size", "lr", "momentum", "weight_decay", "augment", "loss", "focal_gamma", "modality",
                  "seed", "deterministic", "workers"},
                 "train");
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "lr", c.lr);
  read(j, "momentum", c.momentum);
  read(j, "weight_decay", c.weight_decay);
  read(j, "focal_gamma", c.focal_gamma);
  read(j, "seed", c.seed);
  read(j, "deterministic", c.deterministic);
  read(j, "workers", c.workers);
  if (j.contains("loss")) c.loss = parse_loss(j.at("loss").get<std::string>());
  if (j.contains("modality")) c.modality = parse_modality(j.at("modality").get<std::string>());
  if (j.contains("augment")) {
    const json &a = j.at("augment");
    reject_unknown(a, {"strategy", "length", "crop_min", "crop_max", "pad_length"}, "train.augment");
    if (a.contains("strategy")) c.augment.strategy = parse_augment(a.at("strategy").get<std::string>());
    read(a, "length", c.augment.length);
    read(a, "crop_min", c.augment.crop_min);
    read(a, "crop_max", c.augment.crop_max);
    read(a, "pad_length", c.augment.pad_length);
  }
  return c;
}

void from_json(const json &j, TrainConfig &c) { c = merge_train_config(TrainConfig{}, j); }

} // namespace dgstgcn
