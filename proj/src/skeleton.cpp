#include "dgstgcn/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>

#include "dgstgcn/binary_io.hpp"
#include "dgstgcn/error.hpp"

namespace dgstgcn {

using nlohmann::json;

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto &s : samples) out.push_back(s.label);
  return out;
}

// ---------------------------------------------------------------------------
// Topology

std::vector<Bone> ntu_bones() {
  // 1-based (child, parent) pairs of the Kinect v2 skeleton.
  static const int pairs[25][2] = {{1, 2},   {2, 21},  {3, 21},  {4, 3},   {5, 21},  {6, 5},   {7, 6},
                                   {8, 7},   {9, 21},  {10, 9},  {11, 10}, {12, 11}, {13, 1},  {14, 13},
                                   {15, 14}, {16, 15}, {17, 1},  {18, 17}, {19, 18}, {20, 19}, {21, 21},
                                   {22, 8},  {23, 8},  {24, 12}, {25, 12}};
  std::vector<Bone> bones;
  for (const auto &p : pairs) bones.emplace_back(p[0] - 1, p[1] - 1);
  return bones;
}

std::vector<Bone> tree_bones(Index joints) {
  std::vector<Bone> bones;
  for (Index v = 0; v < joints; ++v) bones.emplace_back(static_cast<int>(v), static_cast<int>(v == 0 ? 0 : (v - 1) / 2));
  return bones;
}

std::vector<Bone> default_bones(Index joints) { return joints == 25 ? ntu_bones() : tree_bones(joints); }

void validate_bones(const std::vector<Bone> &bones, Index joints) {
  if (static_cast<Index>(bones.size()) != joints)
    throw ConfigError("bone list has " + std::to_string(bones.size()) + " entries for " + std::to_string(joints) +
                      " joints");
  std::vector<int> seen(static_cast<std::size_t>(joints), 0);
  int roots = 0;
  for (const auto &[child, parent] : bones) {
    if (child < 0 || child >= joints || parent < 0 || parent >= joints)
      throw ConfigError("bone (" + std::to_string(child) + ", " + std::to_string(parent) + ") out of range");
    if (seen[static_cast<std::size_t>(child)]++) throw ConfigError("joint " + std::to_string(child) + " has two parents");
    if (child == parent) ++roots;
  }
  if (roots != 1) throw ConfigError("bone list must have exactly one root, found " + std::to_string(roots));
}

Index root_joint(const std::vector<Bone> &bones) {
  for (const auto &[child, parent] : bones)
    if (child == parent) return child;
  throw ConfigError("bone list has no root");
}

RowMatrix<double> bone_adjacency(const std::vector<Bone> &bones, Index joints) {
  validate_bones(bones, joints);
  RowMatrix<double> a = RowMatrix<double>::Identity(joints, joints);
  for (const auto &[child, parent] : bones) {
    a(child, parent) = 1.0;
    a(parent, child) = 1.0;
  }
  return a;
}

namespace {

RowMatrix<double> row_normalized(RowMatrix<double> m) {
  for (Index r = 0; r < m.rows(); ++r) {
    const double s = m.row(r).sum();
    if (s > 0) m.row(r) /= s;
  }
  return m;
}

} // namespace

Tensor<double> topology_partitions(const std::vector<Bone> &bones, Index joints, Index groups) {
  validate_bones(bones, joints);
  // Matrices below are indexed [target, source]; the result is transposed
  // into the [source, target] layout used by graph_mix.
  std::vector<RowMatrix<double>> parts;
  if (groups == 1) {
    parts.push_back(row_normalized(bone_adjacency(bones, joints)));
  } else if (groups == 3) {
    RowMatrix<double> inward = RowMatrix<double>::Zero(joints, joints);
    RowMatrix<double> outward = RowMatrix<double>::Zero(joints, joints);
    for (const auto &[child, parent] : bones) {
      if (child == parent) continue;
      inward(parent, child) = 1.0; // parent receives from child
      outward(child, parent) = 1.0;
    }
    parts.push_back(RowMatrix<double>::Identity(joints, joints));
    parts.push_back(row_normalized(inward));
    parts.push_back(row_normalized(outward));
  } else {
    throw ConfigError("skeleton topology provides K=1 or K=3 matrices, not K=" + std::to_string(groups));
  }
  Tensor<double> out({groups, joints, joints});
  for (Index k = 0; k < groups; ++k)
    MatrixMap<double>(out.ptr() + k * joints * joints, joints, joints) = parts[static_cast<std::size_t>(k)].transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Temporal sampling

namespace {

void require_frames(Index frames, Index length) {
  if (frames < 1) throw DataError("temporal sampling of an empty sequence");
  if (length < 1) throw ConfigError("temporal sampling target length must be >= 1");
}

} // namespace

std::vector<Index> uniform_sample(Index frames, Index length, std::mt19937_64 &rng) {
  require_frames(frames, length);
  std::vector<Index> idx(static_cast<std::size_t>(length));
  for (Index i = 0; i < length; ++i) {
    const Index lo = i * frames / length, hi = (i + 1) * frames / length;
    if (hi > lo)
      idx[static_cast<std::size_t>(i)] = std::uniform_int_distribution<Index>(lo, hi - 1)(rng);
    else
      idx[static_cast<std::size_t>(i)] = std::clamp<Index>(lo, 0, frames - 1);
  }
  return idx;
}

std::vector<Index> center_sample(Index frames, Index length) {
  require_frames(frames, length);
  std::vector<Index> idx(static_cast<std::size_t>(length));
  for (Index i = 0; i < length; ++i) {
    const Index lo = i * frames / length, hi = (i + 1) * frames / length;
    idx[static_cast<std::size_t>(i)] = hi > lo ? lo + (hi - lo) / 2 : std::clamp<Index>(lo, 0, frames - 1);
  }
  return idx;
}

SkeletonSequence select_frames(const SkeletonSequence &seq, const std::vector<Index> &indices) {
  const Index m = seq.persons(), t = seq.frames(), vc = seq.joints() * seq.channels();
  SkeletonSequence out{Tensor<float>({m, static_cast<Index>(indices.size()), seq.joints(), seq.channels()}), seq.label,
                       seq.id};
  for (Index p = 0; p < m; ++p)
    for (std::size_t j = 0; j < indices.size(); ++j) {
      const Index src = indices[j];
      if (src < 0 || src >= t) throw DataError("frame index " + std::to_string(src) + " out of range");
      std::copy_n(seq.coords.ptr() + (p * t + src) * vc, vc,
                  out.coords.ptr() + (p * static_cast<Index>(indices.size()) + static_cast<Index>(j)) * vc);
    }
  return out;
}

CropWindow random_crop_window(Index frames, double min_ratio, double max_ratio, std::mt19937_64 &rng) {
  if (frames < 1) throw DataError("random crop of an empty sequence");
  if (!(min_ratio > 0 && min_ratio <= max_ratio && max_ratio <= 1.0))
    throw ConfigError("random-crop ratio range must satisfy 0 < min <= max <= 1");
  const double ratio = std::uniform_real_distribution<double>(min_ratio, max_ratio)(rng);
  const Index len = std::clamp<Index>(static_cast<Index>(std::lround(ratio * static_cast<double>(frames))), 1, frames);
  const Index start = std::uniform_int_distribution<Index>(0, frames - len)(rng);
  return {start, len};
}

namespace {

double crop_source(CropWindow w, Index j, Index length) {
  const double src = (static_cast<double>(j) + 0.5) * static_cast<double>(w.length) / static_cast<double>(length) - 0.5;
  return std::clamp(src, 0.0, static_cast<double>(w.length - 1));
}

} // namespace

SkeletonSequence crop_resize(const SkeletonSequence &seq, CropWindow w, Index length) {
  require_frames(seq.frames(), length);
  if (w.length < 1 || w.start < 0 || w.start + w.length > seq.frames()) throw DataError("crop window outside sequence");
  const Index m = seq.persons(), t = seq.frames(), vc = seq.joints() * seq.channels();
  SkeletonSequence out{Tensor<float>({m, length, seq.joints(), seq.channels()}), seq.label, seq.id};
  using Row = Eigen::Map<const Eigen::VectorXf>;
  for (Index j = 0; j < length; ++j) {
    const double src = crop_source(w, j, length);
    const Index i0 = static_cast<Index>(std::floor(src));
    const Index i1 = std::min(i0 + 1, w.length - 1);
    const float frac = static_cast<float>(src - static_cast<double>(i0));
    for (Index p = 0; p < m; ++p) {
      Row a(seq.coords.ptr() + (p * t + w.start + i0) * vc, vc);
      Row b(seq.coords.ptr() + (p * t + w.start + i1) * vc, vc);
      Eigen::Map<Eigen::VectorXf>(out.coords.ptr() + (p * length + j) * vc, vc) = (1.0f - frac) * a + frac * b;
    }
  }
  return out;
}

std::vector<Index> crop_indices(CropWindow w, Index length) {
  std::vector<Index> idx(static_cast<std::size_t>(length));
  for (Index j = 0; j < length; ++j)
    idx[static_cast<std::size_t>(j)] = w.start + static_cast<Index>(std::lround(crop_source(w, j, length)));
  return idx;
}

SkeletonSequence random_crop(const SkeletonSequence &seq, Index length, std::mt19937_64 &rng, double min_ratio,
                             double max_ratio) {
  return crop_resize(seq, random_crop_window(seq.frames(), min_ratio, max_ratio, rng), length);
}

SkeletonSequence pad_circular(const SkeletonSequence &seq, Index max_length) {
  const Index t = seq.frames();
  if (t < 1) throw DataError("padding an empty sequence");
  if (t > max_length)
    std::cerr << "warning: sequence " << seq.id << " has " << t << " frames; truncating to " << max_length << "\n";
  std::vector<Index> idx(static_cast<std::size_t>(max_length));
  for (Index j = 0; j < max_length; ++j) idx[static_cast<std::size_t>(j)] = j % t;
  return select_frames(seq, idx);
}

SkeletonSequence temporal_augment(const SkeletonSequence &seq, const AugmentSpec &spec, bool training,
                                  std::mt19937_64 &rng) {
  switch (spec.strategy) {
  case AugmentStrategy::none_pad:
    return pad_circular(seq, spec.pad_length);
  case AugmentStrategy::random_crop:
    if (training) return random_crop(seq, spec.length, rng, spec.crop_min, spec.crop_max);
    return crop_resize(seq, {0, seq.frames()}, spec.length);
  case AugmentStrategy::uniform_sample:
    return select_frames(seq, training ? uniform_sample(seq.frames(), spec.length, rng)
                                       : center_sample(seq.frames(), spec.length));
  }
  throw ConfigError("unknown augmentation strategy");
}

// ---------------------------------------------------------------------------
// Preprocessing and modalities

namespace {

bool person_present(const SkeletonSequence &seq, Index p) {
  const Index n = seq.frames() * seq.joints() * seq.channels();
  return (Eigen::Map<const Eigen::VectorXf>(seq.coords.ptr() + p * n, n).array() != 0.0f).any();
}

} // namespace

SkeletonSequence preprocess(const SkeletonSequence &seq, Index root) {
  if (seq.frames() < 1) throw DataError("preprocessing an empty sequence");
  if (root < 0 || root >= seq.joints()) throw ConfigError("root joint out of range");
  const Index c = seq.channels(), rows = seq.frames() * seq.joints();
  SkeletonSequence out = seq;
  const Eigen::VectorXf origin = Eigen::Map<const Eigen::VectorXf>(seq.coords.ptr() + root * c, c);
  for (Index p = 0; p < seq.persons(); ++p) {
    if (!person_present(seq, p)) continue; // absent persons stay all-zero
    auto block = Eigen::Map<RowMatrix<float>>(out.coords.ptr() + p * rows * c, rows, c);
    block.rowwise() -= origin.transpose();
  }
  return out;
}

SkeletonSequence derive_modality(const SkeletonSequence &seq, Modality modality, const std::vector<Bone> &bones) {
  const bool bone = modality == Modality::bone || modality == Modality::bone_motion;
  const bool motion = modality == Modality::joint_motion || modality == Modality::bone_motion;
  SkeletonSequence out = seq;
  const Index m = seq.persons(), t = seq.frames(), v = seq.joints(), c = seq.channels();
  if (bone) {
    if (bones.empty()) throw ConfigError("bone modality requires the dataset bone list");
    validate_bones(bones, v);
    for (Index p = 0; p < m; ++p)
      for (Index f = 0; f < t; ++f)
        for (const auto &[child, parent] : bones)
          for (Index ch = 0; ch < c; ++ch)
            out.coords(p, f, child, ch) = seq.coords(p, f, child, ch) - seq.coords(p, f, parent, ch);
  }
  if (motion) {
    const SkeletonSequence base = out;
    const Index vc = v * c;
    for (Index p = 0; p < m; ++p)
      for (Index f = 0; f < t; ++f) {
        auto dst = Eigen::Map<Eigen::VectorXf>(out.coords.ptr() + (p * t + f) * vc, vc);
        if (f + 1 < t)
          dst = Eigen::Map<const Eigen::VectorXf>(base.coords.ptr() + (p * t + f + 1) * vc, vc) -
                Eigen::Map<const Eigen::VectorXf>(base.coords.ptr() + (p * t + f) * vc, vc);
        else
          dst.setZero();
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

Dataset synth_dataset(const SynthOptions &o) {
  if (o.n_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (o.per_class < 0 || o.joints < 1 || (o.channels != 2 && o.channels != 3))
    throw ConfigError("synthetic data: invalid sample count, joint count or coordinate count");
  if (o.min_frames < 1 || o.max_frames < o.min_frames) throw ConfigError("synthetic data: invalid frame range");

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const Index v = o.joints, c = o.channels;

  RowMatrix<double> rest(v, c);
  for (Index j = 0; j < v; ++j)
    for (Index ch = 0; ch < c; ++ch) rest(j, ch) = 0.5 * gauss(rng);

  std::vector<RowMatrix<double>> amplitude, phase;
  for (Index k = 0; k < o.n_classes; ++k) {
    RowMatrix<double> a(v, c), ph(v, c);
    for (Index j = 0; j < v; ++j)
      for (Index ch = 0; ch < c; ++ch) {
        a(j, ch) = 0.1 + 0.3 * unit(rng);
        ph(j, ch) = two_pi * unit(rng);
      }
    amplitude.push_back(a);
    phase.push_back(ph);
  }

  Dataset ds;
  ds.spec.joints = v;
  ds.spec.channels = c;
  ds.spec.max_persons = 2;
  ds.spec.n_classes = o.n_classes;
  ds.spec.bones = default_bones(v);
  for (Index k = 0; k < o.n_classes; ++k) ds.spec.class_names.push_back("class_" + std::to_string(k));

  for (Index i = 0; i < o.per_class; ++i)
    for (Index k = 0; k < o.n_classes; ++k) {
      const Index t = std::uniform_int_distribution<Index>(o.min_frames, o.max_frames)(rng);
      const bool two = unit(rng) < o.second_person;
      SkeletonSequence s{Tensor<float>({2, t, v, c}), static_cast<int>(k),
                         "sample_" + std::to_string(ds.samples.size())};
      const double freq = static_cast<double>(k + 1);
      for (Index p = 0; p < (two ? 2 : 1); ++p) {
        const double offset = two_pi * unit(rng);
        for (Index f = 0; f < t; ++f) {
          const double tau = static_cast<double>(f) / static_cast<double>(t);
          for (Index j = 0; j < v; ++j)
            for (Index ch = 0; ch < c; ++ch) {
              double x = rest(j, ch) + (ch == 0 ? static_cast<double>(p) : 0.0);
              x += amplitude[static_cast<std::size_t>(k)](j, ch) *
                   std::sin(two_pi * freq * tau + phase[static_cast<std::size_t>(k)](j, ch) + offset);
              x += o.noise * gauss(rng);
              s.coords(p, f, j, ch) = static_cast<float>(x);
            }
        }
      }
      ds.samples.push_back(std::move(s));
    }
  return ds;
}

// ---------------------------------------------------------------------------
// SKL1

namespace {

constexpr const char *kDatasetMagic = "SKL1";

template <typename T>
T checked_narrow(Index v, const char *what) {
  if (v < 0 || v > static_cast<Index>(std::numeric_limits<T>::max()))
    throw DataError(std::string("SKL1: ") + what + " " + std::to_string(v) + " does not fit the file format");
  return static_cast<T>(v);
}

} // namespace

std::string encode_dataset(const Dataset &ds) {
  const DatasetSpec &sp = ds.spec;
  ByteWriter w;
  w.bytes(kDatasetMagic);
  w.u32(1);
  w.u32(checked_narrow<std::uint32_t>(static_cast<Index>(ds.samples.size()), "sample count"));
  w.u16(checked_narrow<std::uint16_t>(sp.joints, "joint count"));
  w.u8(checked_narrow<std::uint8_t>(sp.channels, "coordinate count"));
  w.u8(checked_narrow<std::uint8_t>(sp.max_persons, "person count"));
  w.u32(checked_narrow<std::uint32_t>(sp.n_classes, "class count"));
  for (const auto &s : ds.samples) {
    if (s.coords.rank() != 4 || s.joints() != sp.joints || s.channels() != sp.channels || s.persons() > sp.max_persons)
      throw DataError("SKL1: sample " + s.id + " has shape " + shape_string(s.coords.shape()) +
                      " inconsistent with the dataset header");
    if (s.label < 0 || s.label >= sp.n_classes) throw DataError("SKL1: sample " + s.id + " label out of range");
    w.u32(static_cast<std::uint32_t>(s.label));
    w.u16(checked_narrow<std::uint16_t>(s.frames(), "frame count"));
    w.u8(checked_narrow<std::uint8_t>(s.persons(), "person count"));
    for (Index i = 0; i < s.coords.size(); ++i) w.f32(s.coords[i]);
  }
  return w.take();
}

json dataset_sidecar(const Dataset &ds) {
  json j;
  j["class_names"] = ds.spec.class_names;
  json bones = json::array();
  for (const auto &[child, parent] : ds.spec.bones) bones.push_back({child, parent});
  j["bones"] = bones;
  if (ds.spec.adjacency) {
    json rows = json::array();
    for (Index r = 0; r < ds.spec.adjacency->rows(); ++r) {
      std::vector<double> row(ds.spec.adjacency->row(r).begin(), ds.spec.adjacency->row(r).end());
      rows.push_back(row);
    }
    j["adjacency"] = rows;
  }
  std::vector<std::string> ids;
  bool custom = false;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    ids.push_back(ds.samples[i].id);
    custom = custom || ds.samples[i].id != "sample_" + std::to_string(i);
  }
  if (custom) j["sample_ids"] = ids;
  return j;
}

Dataset decode_dataset(const std::string &bytes, const std::optional<json> &sidecar) {
  ByteReader r(bytes, "SKL1");
  r.expect_magic(kDatasetMagic);
  const std::uint32_t version = r.u32();
  if (version != 1) r.fail("unsupported version " + std::to_string(version));
  const std::uint32_t n = r.u32();
  Dataset ds;
  ds.spec.joints = r.u16();
  ds.spec.channels = r.u8();
  ds.spec.max_persons = r.u8();
  ds.spec.n_classes = r.u32();
  if (ds.spec.joints < 1 || ds.spec.channels < 1 || ds.spec.max_persons < 1)
    r.fail("header extents must be positive");
  const Index vc = ds.spec.joints * ds.spec.channels;
  // Each sample needs at least its 7-byte header; reject impossible counts early.
  if (static_cast<std::uint64_t>(n) * 7 > r.remaining())
    r.fail("sample count " + std::to_string(n) + " exceeds the file size");
  ds.samples.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t label = r.u32();
    if (label >= ds.spec.n_classes) r.fail("label " + std::to_string(label) + " out of range");
    const Index t = r.u16();
    const Index m = r.u8();
    if (t < 1) r.fail("sample with zero frames");
    if (m < 1 || m > ds.spec.max_persons) r.fail("person count " + std::to_string(m) + " overflows the header limit");
    const Index count = m * t * vc;
    r.need(static_cast<std::size_t>(count) * 4, "coordinates");
    SkeletonSequence s{Tensor<float>({m, t, ds.spec.joints, ds.spec.channels}), static_cast<int>(label),
                       "sample_" + std::to_string(i)};
    for (Index k = 0; k < count; ++k) s.coords[k] = r.f32();
    ds.samples.push_back(std::move(s));
  }
  if (!r.at_end()) r.fail(std::to_string(r.remaining()) + " trailing bytes");

  ds.spec.bones = default_bones(ds.spec.joints);
  if (sidecar) {
    try {
      const json &j = *sidecar;
      if (j.contains("class_names")) ds.spec.class_names = j.at("class_names").get<std::vector<std::string>>();
      if (j.contains("bones")) {
        ds.spec.bones.clear();
        for (const auto &b : j.at("bones")) ds.spec.bones.emplace_back(b.at(0).get<int>(), b.at(1).get<int>());
      }
      if (j.contains("adjacency")) {
        const auto rows = j.at("adjacency").get<std::vector<std::vector<double>>>();
        RowMatrix<double> a(static_cast<Index>(rows.size()), ds.spec.joints);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (static_cast<Index>(rows[i].size()) != ds.spec.joints) throw DataError("sidecar adjacency row width");
          for (Index c = 0; c < ds.spec.joints; ++c) a(static_cast<Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
        }
        ds.spec.adjacency = a;
      }
      if (j.contains("sample_ids")) {
        const auto ids = j.at("sample_ids").get<std::vector<std::string>>();
        if (ids.size() != ds.samples.size()) throw DataError("sidecar sample_ids count mismatch");
        for (std::size_t i = 0; i < ids.size(); ++i) ds.samples[i].id = ids[i];
      }
    } catch (const json::exception &e) {
      throw DataError(std::string("malformed dataset sidecar: ") + e.what());
    }
    validate_bones(ds.spec.bones, ds.spec.joints);
  }
  return ds;
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string &path, const std::string &bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path);
}

void write_dataset(const std::string &path, const Dataset &ds) {
  write_file(path, encode_dataset(ds));
  write_file(path + ".json", dataset_sidecar(ds).dump(2) + "\n");
}

Dataset read_dataset(const std::string &path) {
  std::optional<json> sidecar;
  std::ifstream probe(path + ".json");
  if (probe) {
    try {
      sidecar = json::parse(probe);
    } catch (const json::exception &e) {
      throw DataError("malformed dataset sidecar " + path + ".json: " + e.what());
    }
  }
  return decode_dataset(read_file(path), sidecar);
}

} // namespace dgstgcn
