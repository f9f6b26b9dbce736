#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dgstgcn/config.hpp"
#include "dgstgcn/tensor.hpp"

namespace dgstgcn {

/// One sample: coords [M persons, T frames, V joints, C coords]. An absent
/// person is stored as all zeros.
struct SkeletonSequence {
  Tensor<float> coords;
  int label = 0;
  std::string id;

  Index persons() const { return coords.dim(0); }
  Index frames() const { return coords.dim(1); }
  Index joints() const { return coords.dim(2); }
  Index channels() const { return coords.dim(3); }
  friend bool operator==(const SkeletonSequence &, const SkeletonSequence &) = default;
};

/// Dataset metadata. Bones are 0-based (child, parent) pairs, one per joint;
/// the root is its own parent.
struct DatasetSpec {
  Index joints = 25;
  Index channels = 3;
  Index max_persons = 2;
  Index n_classes = 0;
  std::vector<std::string> class_names;
  std::vector<Bone> bones;
  std::optional<RowMatrix<double>> adjacency; // symmetric, self-loops

  friend bool operator==(const DatasetSpec &, const DatasetSpec &) = default;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<SkeletonSequence> samples;

  std::vector<int> labels() const;
  friend bool operator==(const Dataset &, const Dataset &) = default;
};

// ---------------------------------------------------------------------------
// Skeleton topology

/// 25-joint Kinect layout, root at the spine middle (joint 20, 0-based).
std::vector<Bone> ntu_bones();
/// Binary-tree layout with parent (v-1)/2 and root 0.
std::vector<Bone> tree_bones(Index joints);
/// ntu_bones() for 25 joints, tree_bones otherwise.
std::vector<Bone> default_bones(Index joints);

/// Throws ConfigError unless every joint appears exactly once as a child and
/// exactly one joint is its own parent.
void validate_bones(const std::vector<Bone> &bones, Index joints);
Index root_joint(const std::vector<Bone> &bones);

/// Symmetric bone adjacency with self-loops.
RowMatrix<double> bone_adjacency(const std::vector<Bone> &bones, Index joints);

/// Fixed mixing matrices [K, V(source), V(target)] derived from the bone
/// graph: K=1 gives D^-1 (A + I); K=3 gives {I, inward, outward}, each
/// row-normalized over the receiving joint.
Tensor<double> topology_partitions(const std::vector<Bone> &bones, Index joints, Index groups);

// ---------------------------------------------------------------------------
// Temporal sampling

/// One random index from each of N equal substrings [floor(iT/N), floor((i+1)T/N)).
std::vector<Index> uniform_sample(Index frames, Index length, std::mt19937_64 &rng);
/// Deterministic variant using the middle of each substring.
std::vector<Index> center_sample(Index frames, Index length);

SkeletonSequence select_frames(const SkeletonSequence &seq, const std::vector<Index> &indices);

struct CropWindow {
  Index start;
  Index length;
};

/// Window covering a ratio drawn from [min_ratio, max_ratio] of the frames.
CropWindow random_crop_window(Index frames, double min_ratio, double max_ratio, std::mt19937_64 &rng);

/// Linear interpolation of the window to `length` frames (half-pixel centers, clamped).
SkeletonSequence crop_resize(const SkeletonSequence &seq, CropWindow window, Index length);

/// Nearest source frame for each output frame of crop_resize.
std::vector<Index> crop_indices(CropWindow window, Index length);

SkeletonSequence random_crop(const SkeletonSequence &seq, Index length, std::mt19937_64 &rng, double min_ratio = 0.5,
                             double max_ratio = 1.0);

/// Repeat frames cyclically up to max_length; longer inputs are truncated
/// with a warning on stderr.
SkeletonSequence pad_circular(const SkeletonSequence &seq, Index max_length = 300);

/// Apply the configured temporal augmentation (eval: deterministic center sampling).
SkeletonSequence temporal_augment(const SkeletonSequence &seq, const AugmentSpec &spec, bool training,
                                  std::mt19937_64 &rng);

// ---------------------------------------------------------------------------
// Preprocessing and modalities

/// Translate all persons so person 0's root joint in frame 0 is the origin.
SkeletonSequence preprocess(const SkeletonSequence &seq, Index root);

/// bone[v] = x[v] - x[parent v] (root bone zero); motion[t] = x[t+1] - x[t]
/// with the last frame zero. Bone modalities need a bone list.
SkeletonSequence derive_modality(const SkeletonSequence &seq, Modality modality, const std::vector<Bone> &bones);

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthOptions {
  Index n_classes = 4;
  Index per_class = 64;
  Index joints = 25;
  Index channels = 3;
  Index min_frames = 40;
  Index max_frames = 80;
  double noise = 0.05;
  double second_person = 0.5;
  std::uint64_t seed = 0;
};

/// Each class oscillates its joints at (class + 1) cycles per clip with
/// class-specific per-joint amplitude and phase patterns; every sample gets a
/// random global phase and noise. Labels are exactly balanced.
Dataset synth_dataset(const SynthOptions &opts);

// ---------------------------------------------------------------------------
// SKL1 files

std::string encode_dataset(const Dataset &ds);
/// `sidecar` is the optional JSON metadata; without it bones default to
/// default_bones(V) and samples are named "sample_<index>".
Dataset decode_dataset(const std::string &bytes, const std::optional<nlohmann::json> &sidecar = std::nullopt);

/// Sidecar metadata: class names, bones, optional adjacency and sample ids.
nlohmann::json dataset_sidecar(const Dataset &ds);

/// Writes `path` and the sidecar `path + ".json"`.
void write_dataset(const std::string &path, const Dataset &ds);
/// Reads `path`, plus `path + ".json"` when present.
Dataset read_dataset(const std::string &path);

std::string read_file(const std::string &path);
void write_file(const std::string &path, const std::string &bytes);

} // namespace dgstgcn
