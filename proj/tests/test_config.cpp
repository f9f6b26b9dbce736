#include <doctest.h>

#include <json.hpp>

#include "dgstgcn/config.hpp"
#include "dgstgcn/skeleton.hpp"

using namespace dgstgcn;
using nlohmann::json;

TEST_CASE("component masks") {
  CHECK(ComponentMask::parse("pa+da+ca") == ComponentMask{true, true, true});
  CHECK(ComponentMask::parse("da") == ComponentMask{false, true, false});
  CHECK(ComponentMask::parse("ca+pa") == ComponentMask{true, false, true});
  CHECK(ComponentMask{true, false, true}.to_string() == "pa+ca");
  CHECK_THROWS_AS(ComponentMask::parse("pa+xa"), ConfigError);
  CHECK_FALSE(ComponentMask::parse("").any());
}

TEST_CASE("config JSON round trip") {
  ModelConfig m;
  m.n_blocks = 6;
  m.downsample_blocks = {3, 5};
  m.spatial.mask = {true, true, false};
  m.spatial.groups = 4;
  m.temporal.fusion = FusionMode::concat;
  m.temporal.branches[2].width = 3;
  m.bones = tree_bones(25);
  const json jm = m;
  CHECK(json(jm.get<ModelConfig>()) == jm);

  TrainConfig t;
  t.epochs = 7;
  t.loss = LossKind::class_balanced_focal;
  t.modality = Modality::bone_motion;
  t.augment.strategy = AugmentStrategy::random_crop;
  t.seed = 99;
  const json jt = t;
  CHECK(json(jt.get<TrainConfig>()) == jt);

  const ModelConfig merged = merge_model_config(m, json{{"base_width", 32}});
  CHECK(merged.base_width == 32);
  CHECK(merged.n_blocks == 6);
}

TEST_CASE("unknown keys and names are rejected") {
  CHECK_THROWS_AS(json({{"n_block", 3}}).get<ModelConfig>(), ConfigError);
  CHECK_THROWS_AS(json({{"spatial", {{"group", 4}}}}).get<ModelConfig>(), ConfigError);
  CHECK_THROWS_AS(json({{"temporal", {{"fusion", "average"}}}}).get<ModelConfig>(), ConfigError);
  CHECK_THROWS_AS(json({{"learning_rate", 0.1}}).get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS(json({{"augment", {{"len", 10}}}}).get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS(parse_modality("depth"), ConfigError);
}

TEST_CASE("presets") {
  const Preset ablation = preset("paper-ablation");
  CHECK(ablation.train.augment.length == 64);
  CHECK(ablation.train.epochs == 100);
  CHECK(ablation.train.batch_size == 128);
  CHECK(ablation.train.lr == 0.1);
  CHECK(ablation.train.momentum == 0.9);
  CHECK(ablation.train.weight_decay == 5e-4);
  CHECK(ablation.model.n_blocks == 10);
  CHECK(ablation.model.base_width == 64);
  const Preset sota = preset("paper-sota");
  CHECK(sota.train.augment.length == 100);
  CHECK(sota.train.epochs == 150);
  const Preset desk = preset("desk");
  CHECK(desk.train.epochs == 30);
  CHECK(desk.train.batch_size == 48);
  CHECK_NOTHROW(desk.model.validate());
  CHECK_THROWS_AS(preset("laptop"), ConfigError);
}

TEST_CASE("inconsistent configurations") {
  ModelConfig c;
  c.spatial.mode = SpatialMode::fixed_topology;
  c.spatial.groups = 3;
  c.bones = ntu_bones();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.spatial.mask = {true, false, false};
  CHECK_NOTHROW(c.validate());
  c.spatial.groups = 8;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  ModelConfig v;
  v.temporal.mode = TemporalMode::vanilla;
  CHECK_THROWS_AS(v.validate(), ConfigError);
  v.temporal.fusion = FusionMode::off;
  CHECK_NOTHROW(v.validate());

  ModelConfig narrow;
  narrow.base_width = 4;
  CHECK_THROWS_AS(narrow.validate(), ConfigError);

  TrainConfig t;
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}
