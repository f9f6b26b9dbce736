#include <doctest.h>

#include <map>
#include <random>

#include "dgstgcn/skeleton.hpp"

using namespace dgstgcn;

namespace {

// One person, V=1, C=1, frame t holds value f(t).
template <typename F>
SkeletonSequence ramp(Index frames, F f) {
  SkeletonSequence s{Tensor<float>({1, frames, 1, 1}), 0, "r"};
  for (Index t = 0; t < frames; ++t) s.coords[t] = static_cast<float>(f(t));
  return s;
}

SkeletonSequence random_sequence(Index m, Index t, Index v, Index c, std::mt19937_64 &rng) {
  std::normal_distribution<float> n;
  SkeletonSequence s{Tensor<float>({m, t, v, c}), 1, "x"};
  for (Index i = 0; i < s.coords.size(); ++i) s.coords[i] = n(rng);
  return s;
}

} // namespace

TEST_CASE("uniform sampling") {
  std::mt19937_64 rng(1);
  CHECK(uniform_sample(5, 5, rng) == std::vector<Index>{0, 1, 2, 3, 4});
  std::map<Index, int> counts;
  for (int d = 0; d < 10000; ++d) {
    const auto idx = uniform_sample(10, 5, rng);
    for (Index i = 0; i < 5; ++i) {
      const Index got = idx[static_cast<std::size_t>(i)];
      REQUIRE((got == 2 * i || got == 2 * i + 1));
      ++counts[got];
    }
  }
  for (const auto &[index, n] : counts) CHECK(n / 10000.0 == doctest::Approx(0.5).epsilon(0.04));
  const auto short_clip = uniform_sample(3, 6, rng);
  CHECK(short_clip.size() == 6);
  CHECK(std::is_sorted(short_clip.begin(), short_clip.end()));
  CHECK(*std::max_element(short_clip.begin(), short_clip.end()) < 3);
  CHECK_THROWS_AS(uniform_sample(0, 4, rng), DataError);
  CHECK(center_sample(10, 5) == std::vector<Index>{1, 3, 5, 7, 9});
}

TEST_CASE("random crop") {
  std::mt19937_64 rng(2);
  const SkeletonSequence r = ramp(10, [](Index t) { return t; });
  const SkeletonSequence resized = crop_resize(r, {0, 10}, 5);
  const float expected[] = {0.5f, 2.5f, 4.5f, 6.5f, 8.5f};
  for (Index j = 0; j < 5; ++j) CHECK(resized.coords[j] == doctest::Approx(expected[j]).epsilon(1e-6));
  CHECK(crop_resize(r, {0, 10}, 10) == r);
  const SkeletonSequence constant = ramp(17, [](Index) { return 3.25; });
  const SkeletonSequence out = random_crop(constant, 9, rng);
  for (Index j = 0; j < 9; ++j) CHECK(out.coords[j] == 3.25f);
  for (int i = 0; i < 200; ++i) {
    const CropWindow w = random_crop_window(40, 0.5, 1.0, rng);
    CHECK(w.length >= 20);
    CHECK(w.start + w.length <= 40);
  }
  CHECK_THROWS_AS(random_crop_window(0, 0.5, 1.0, rng), DataError);
}

TEST_CASE("circular padding") {
  const SkeletonSequence ab = ramp(2, [](Index t) { return t == 0 ? 1.0 : 2.0; });
  const SkeletonSequence padded = pad_circular(ab, 5);
  CHECK(std::vector<float>(padded.coords.ptr(), padded.coords.ptr() + 5) == std::vector<float>{1, 2, 1, 2, 1});
  std::mt19937_64 rng(3);
  const SkeletonSequence s = random_sequence(2, 7, 3, 2, rng);
  CHECK(pad_circular(s, 7) == s);
  const SkeletonSequence p = pad_circular(s, 30);
  for (Index m = 0; m < 2; ++m)
    for (Index t = 0; t < 30; ++t)
      for (Index v = 0; v < 3; ++v)
        for (Index c = 0; c < 2; ++c) CHECK(p.coords(m, t, v, c) == s.coords(m, t % 7, v, c));
  CHECK(pad_circular(s, 4).frames() == 4);
}

TEST_CASE("modalities") {
  std::mt19937_64 rng(4);
  const std::vector<Bone> chain{{0, 0}, {1, 0}};
  SkeletonSequence two{Tensor<float>({1, 1, 2, 2}, {0, 0, 1, 2}), 0, "c"};
  const SkeletonSequence bone = derive_modality(two, Modality::bone, chain);
  CHECK(bone.coords(0, 0, 1, 0) == 1.0f);
  CHECK(bone.coords(0, 0, 1, 1) == 2.0f);
  CHECK(bone.coords(0, 0, 0, 0) == 0.0f);

  const SkeletonSequence s = random_sequence(2, 6, 4, 3, rng);
  CHECK(derive_modality(s, Modality::joint, {}) == s);
  SkeletonSequence still = s;
  for (Index t = 1; t < 6; ++t)
    for (Index m = 0; m < 2; ++m)
      for (Index v = 0; v < 4; ++v)
        for (Index c = 0; c < 3; ++c) still.coords(m, t, v, c) = s.coords(m, 0, v, c);
  const SkeletonSequence no_motion = derive_modality(still, Modality::joint_motion, {});
  for (Index i = 0; i < no_motion.coords.size(); ++i) CHECK(no_motion.coords[i] == 0.0f);

  const SkeletonSequence motion = derive_modality(s, Modality::joint_motion, {});
  for (Index m = 0; m < 2; ++m)
    for (Index v = 0; v < 4; ++v)
      for (Index c = 0; c < 3; ++c) {
        double acc = s.coords(m, 0, v, c);
        for (Index t = 1; t < 6; ++t) {
          acc += motion.coords(m, t - 1, v, c);
          CHECK(acc == doctest::Approx(s.coords(m, t, v, c)).epsilon(1e-5));
        }
        CHECK(motion.coords(m, 5, v, c) == 0.0f);
      }
  CHECK_THROWS_AS(derive_modality(s, Modality::bone, {}), ConfigError);
}

TEST_CASE("preprocessing") {
  std::mt19937_64 rng(5);
  const std::vector<Bone> bones = tree_bones(4);
  const Index root = root_joint(bones);
  const SkeletonSequence s = random_sequence(2, 5, 4, 3, rng);
  const SkeletonSequence centered = preprocess(s, root);
  for (Index c = 0; c < 3; ++c) CHECK(centered.coords(0, 0, root, c) == 0.0f);
  CHECK(preprocess(centered, root) == centered);
  SkeletonSequence shifted = s;
  for (Index i = 0; i < shifted.coords.size(); ++i) shifted.coords[i] += 5.0f;
  const SkeletonSequence back = preprocess(shifted, root);
  for (Index i = 0; i < back.coords.size(); ++i) CHECK(back.coords[i] == doctest::Approx(centered.coords[i]).epsilon(1e-5));
  SkeletonSequence solo = s;
  for (Index i = solo.coords.size() / 2; i < solo.coords.size(); ++i) solo.coords[i] = 0;
  const SkeletonSequence solo_out = preprocess(solo, root);
  for (Index i = solo.coords.size() / 2; i < solo.coords.size(); ++i) CHECK(solo_out.coords[i] == 0.0f);
}

TEST_CASE("topology") {
  const std::vector<Bone> chain{{0, 0}, {1, 0}, {2, 1}};
  const Tensor<double> one = topology_partitions(chain, 3, 1);
  for (Index target = 0; target < 3; ++target) {
    double s = 0;
    for (Index source = 0; source < 3; ++source) s += one(0, source, target);
    CHECK(s == doctest::Approx(1.0));
  }
  CHECK(one(0, 0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(one(0, 0, 0) == doctest::Approx(0.5));
  const Tensor<double> three = topology_partitions(chain, 3, 3);
  CHECK(three.shape() == Shape{3, 3, 3});
  validate_bones(ntu_bones(), 25);
  CHECK(root_joint(ntu_bones()) == 20);
  CHECK_THROWS_AS(validate_bones({{0, 0}, {1, 1}}, 2), ConfigError);
  const RowMatrix<double> a = bone_adjacency(chain, 3);
  CHECK(a == a.transpose());
  CHECK(a.diagonal().minCoeff() == 1.0);
}

TEST_CASE("synthetic data") {
  SynthOptions o;
  o.per_class = 5;
  o.seed = 7;
  const Dataset a = synth_dataset(o), b = synth_dataset(o);
  CHECK(encode_dataset(a) == encode_dataset(b));
  std::vector<int> counts(4);
  for (int l : a.labels()) ++counts[static_cast<std::size_t>(l)];
  CHECK(counts == std::vector<int>{5, 5, 5, 5});
  o.seed = 8;
  CHECK(encode_dataset(synth_dataset(o)) != encode_dataset(a));
}

TEST_CASE("SKL1 format") {
  SynthOptions o;
  o.per_class = 3;
  o.n_classes = 3;
  Dataset d = synth_dataset(o);
  d.spec.adjacency = bone_adjacency(d.spec.bones, d.spec.joints);
  const std::string bytes = encode_dataset(d);
  CHECK(bytes.substr(0, 4) == "SKL1");
  CHECK(decode_dataset(bytes, dataset_sidecar(d)) == d);

  const Dataset empty{d.spec, {}};
  CHECK(decode_dataset(encode_dataset(empty), dataset_sidecar(empty)) == empty);

  std::string corrupt = bytes;
  corrupt[0] = 'X';
  try {
    decode_dataset(corrupt);
    FAIL("expected FormatError");
  } catch (const FormatError &e) {
    CHECK(std::string(e.what()).find("\"SKL1\"") != std::string::npos);
    CHECK(e.offset() == 0);
  }
  CHECK_THROWS_AS(decode_dataset(bytes.substr(0, bytes.size() - 3)), FormatError);
  try {
    decode_dataset(bytes.substr(0, 30));
    FAIL("expected FormatError");
  } catch (const FormatError &e) {
    CHECK(e.offset() <= 30);
  }
}
