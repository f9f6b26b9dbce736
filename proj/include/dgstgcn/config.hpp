#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dgstgcn/tensor.hpp"

namespace dgstgcn {

/// (child, parent) joint pair; the root is its own parent.
using Bone = std::pair<int, int>;

// ---------------------------------------------------------------------------
// Model

enum class SpatialMode { fixed_topology, refined_topology, from_scratch };

/// Which terms make up each group's coefficient matrix: the static learned
/// matrix (pa), the channel-agnostic dynamic term (da) and the
/// channel-specific dynamic term (ca).
struct ComponentMask {
  bool pa = true;
  bool da = true;
  bool ca = true;

  bool dynamic() const { return da || ca; }
  bool any() const { return pa || da || ca; }
  std::string to_string() const;
  static ComponentMask parse(const std::string &text); // e.g. "pa+da+ca"
  friend bool operator==(const ComponentMask &, const ComponentMask &) = default;
};

struct SpatialConfig {
  SpatialMode mode = SpatialMode::from_scratch;
  ComponentMask mask;
  Index groups = 8; // K
};

enum class TemporalMode { vanilla, multi_group };
enum class FusionMode { off, djsf, concat, sum };
enum class BranchKind { conv, max_pool, pointwise };

struct Branch {
  BranchKind kind = BranchKind::conv;
  Index kernel = 3;
  Index dilation = 1;
  Index width = 0; // 0: derived from the module width
  friend bool operator==(const Branch &, const Branch &) = default;
};

/// Four kernel-3 convolutions with dilations 1..4, a kernel-3 max-pool and a pointwise branch.
std::vector<Branch> default_branches();

/// Resolve per-branch widths for a module of `channels` channels. Unset
/// widths get floor(channels / branches); the remainder goes to the last
/// pointwise branch (or the last branch if there is none). Explicit widths
/// must sum to `channels`.
std::vector<Index> branch_widths(Index channels, const std::vector<Branch> &branches);

struct TemporalConfig {
  TemporalMode mode = TemporalMode::multi_group;
  FusionMode fusion = FusionMode::djsf;
  std::vector<Branch> branches = default_branches();
  Index vanilla_kernel = 9;
  bool inner_relu = true; // ReLU between the shared input projection and the branches
};

struct NormConfig {
  double eps = 1e-5;
  double momentum = 0.1;
};

struct BlockShape {
  Index in_channels;
  Index out_channels;
  Index stride;
};

struct ModelConfig {
  Index n_blocks = 10;
  Index base_width = 64;
  std::vector<Index> downsample_blocks{5, 8}; // 1-based; stride 2 and doubled width
  SpatialConfig spatial;
  TemporalConfig temporal;
  Index joints = 25;
  Index in_channels = 3;
  Index n_classes = 120;
  Index persons = 2;
  double dropout = 0.0;
  NormConfig norm;
  std::vector<Bone> bones; // required by the fixed / refined topology modes

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
  std::vector<BlockShape> block_plan() const;
};

// ---------------------------------------------------------------------------
// Training

enum class AugmentStrategy { none_pad, random_crop, uniform_sample };
enum class LossKind { cross_entropy, class_balanced_focal };
enum class Modality { joint, bone, joint_motion, bone_motion };

struct AugmentSpec {
  AugmentStrategy strategy = AugmentStrategy::uniform_sample;
  Index length = 64;     // target clip length
  double crop_min = 0.5; // random_crop ratio range
  double crop_max = 1.0;
  Index pad_length = 300; // none_pad target
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  AugmentSpec augment;
  LossKind loss = LossKind::cross_entropy;
  double focal_gamma = 2.0;
  Modality modality = Modality::joint;
  std::uint64_t seed = 0;
  bool deterministic = true;
  int workers = 1;

  void validate() const;
};

struct Preset {
  ModelConfig model;
  TrainConfig train;
};

/// "paper-ablation", "paper-sota" or "desk".
Preset preset(const std::string &name);
std::vector<std::string> preset_names();

// ---------------------------------------------------------------------------
// Enum names and JSON. Parsing rejects unknown keys and unknown enum names.

std::string to_string(SpatialMode);
std::string to_string(TemporalMode);
std::string to_string(FusionMode);
std::string to_string(BranchKind);
std::string to_string(AugmentStrategy);
std::string to_string(LossKind);
std::string to_string(Modality);
SpatialMode parse_spatial_mode(const std::string &);
TemporalMode parse_temporal_mode(const std::string &);
FusionMode parse_fusion_mode(const std::string &);
AugmentStrategy parse_augment(const std::string &);
LossKind parse_loss(const std::string &);
Modality parse_modality(const std::string &);

void to_json(nlohmann::json &j, const ModelConfig &c);
void from_json(const nlohmann::json &j, ModelConfig &c);
void to_json(nlohmann::json &j, const TrainConfig &c);
void from_json(const nlohmann::json &j, TrainConfig &c);

/// Overlay the keys present in `j` onto `base`.
ModelConfig merge_model_config(ModelConfig base, const nlohmann::json &j);
TrainConfig merge_train_config(TrainConfig base, const nlohmann::json &j);

} // namespace dgstgcn
