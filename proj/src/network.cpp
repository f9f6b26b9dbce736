#include "dgstgcn/network.hpp"

#include <map>

#include "dgstgcn/binary_io.hpp"
#include "dgstgcn/skeleton.hpp"

namespace dgstgcn {

using nlohmann::json;

template <typename Scalar>
Var<Scalar> Block<Scalar>::operator()(const Var<Scalar> &x, bool training) {
  const Var<Scalar> y = temporal(relu(spatial(x, training)), training);
  const Var<Scalar> res = projected ? residual_norm(residual(x), training) : x;
  return relu(add(y, res));
}

template <typename Scalar>
void Block<Scalar>::collect(ParamSink<Scalar> &sink, const std::string &prefix) {
  spatial.collect(sink, prefix + ".spatial");
  temporal.collect(sink, prefix + ".temporal");
  if (projected) {
    residual.collect(sink, prefix + ".residual");
    residual_norm.collect(sink, prefix + ".residual_norm");
  }
}

template <typename Scalar>
Model<Scalar>::Model(const ModelConfig &config, std::uint64_t seed) : config_(config), dropout_rng_(seed ^ 0x5eedULL) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::vector<Bone> bones = config.bones;
  if (bones.empty() && config.spatial.mode != SpatialMode::from_scratch) bones = default_bones(config.joints);
  for (const BlockShape &s : config.block_plan()) {
    Block<Scalar> b;
    b.shape = s;
    b.spatial = DgGcn<Scalar>(s.in_channels, s.out_channels, config.joints, config.spatial, bones, config.norm, rng);
    b.temporal = DgTcn<Scalar>(s.out_channels, s.stride, config.joints, config.temporal, config.norm, rng);
    b.projected = s.in_channels != s.out_channels || s.stride != 1;
    if (b.projected) {
      b.residual = TemporalConv<Scalar>(s.in_channels, s.out_channels, 1, 1, s.stride, true, rng);
      b.residual_norm = BatchNorm<Scalar>(s.out_channels, config.norm.eps, config.norm.momentum);
    }
    blocks.push_back(std::move(b));
  }
  head = PointwiseConv<Scalar>(blocks.back().shape.out_channels, config.n_classes, true, rng);
}

template <typename Scalar>
std::vector<Scalar> person_weights(const Tensor<Scalar> &batch) {
  const Index n = batch.dim(0), m = batch.dim(1);
  const Index per = m > 0 ? batch.size() / (n * m) : 0;
  std::vector<Scalar> w(static_cast<std::size_t>(n * m));
  for (Index i = 0; i < n; ++i) {
    Index present = 0;
    std::vector<bool> mask(static_cast<std::size_t>(m));
    for (Index p = 0; p < m; ++p) {
      const Index off = (i * m + p) * per;
      mask[static_cast<std::size_t>(p)] = (batch.data().segment(off, per).array() != Scalar(0)).any();
      present += mask[static_cast<std::size_t>(p)];
    }
    for (Index p = 0; p < m; ++p)
      w[static_cast<std::size_t>(i * m + p)] =
          present == 0 ? Scalar(1) / static_cast<Scalar>(m)
                       : (mask[static_cast<std::size_t>(p)] ? Scalar(1) / static_cast<Scalar>(present) : Scalar(0));
  }
  return w;
}

template <typename Scalar>
Var<Scalar> Model<Scalar>::forward(const Tensor<Scalar> &batch, bool training) {
  if (batch.rank() != 5)
    throw DimensionError("model input must be [N,M,C,T,V], got " + shape_string(batch.shape()));
  const Index n = batch.dim(0), m = batch.dim(1), c = batch.dim(2), t = batch.dim(3), v = batch.dim(4);
  if (c != config_.in_channels || v != config_.joints)
    throw DimensionError("model expects " + std::to_string(config_.in_channels) + " channels and " +
                         std::to_string(config_.joints) + " joints, got " + shape_string(batch.shape()));
  if (t < 1) throw DataError("model input has no frames");

  Var<Scalar> x(batch.reshaped({n * m, c, t, v}));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    x = blocks[i](x, training);
    if (!x.value().all_finite()) throw NumericalError("non-finite activations after block " + std::to_string(i + 1));
  }
  Var<Scalar> pooled = mean(mean(x, 3, false), 2, false); // [N*M, C]
  pooled = person_pool(pooled, person_weights(batch), m);
  if (config_.dropout > 0) pooled = dropout(pooled, config_.dropout, training, dropout_rng_);
  return head(pooled);
}

template <typename Scalar>
ParamSink<Scalar> Model<Scalar>::inventory() {
  ParamSink<Scalar> sink;
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(sink, "blocks." + std::to_string(i + 1));
  head.collect(sink, "head");
  return sink;
}

template <typename Scalar>
void Model<Scalar>::zero_grad() {
  for (auto &p : parameters()) p.param->zero_grad();
}

template <typename Scalar>
void backward_and_step(Model<Scalar> &model, const Var<Scalar> &loss, const SgdOptions &opts) {
  if (!loss.value().all_finite()) throw NumericalError("non-finite loss");
  backward(loss);
  const auto params = model.parameters();
  sgd_momentum_step(params, opts);
  for (auto &p : params) p.param->zero_grad();
}

// ---------------------------------------------------------------------------
// DGW1

namespace {

constexpr const char *kCheckpointMagic = "DGW1";

template <typename Scalar>
void write_entry(ByteWriter &w, const std::string &name, const Tensor<Scalar> &t) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.bytes(name);
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (Index d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (Index i = 0; i < t.size(); ++i) w.f32(static_cast<float>(t[i]));
}

} // namespace

template <typename Scalar>
std::string encode_checkpoint(Model<Scalar> &model) {
  ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(1);
  const std::string cfg = json(model.config()).dump();
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg);
  auto inv = model.inventory();
  for (auto &p : inv.params) write_entry(w, p.name, p.param->value());
  for (auto &b : inv.buffers) write_entry(w, b.name, *b.buffer);
  return w.take();
}

template <typename Scalar>
Model<Scalar> decode_checkpoint(const std::string &bytes) {
  ByteReader r(bytes, "DGW1");
  r.expect_magic(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != 1) r.fail("unsupported version " + std::to_string(version));
  const std::uint32_t len = r.u32();
  ModelConfig cfg;
  try {
    cfg = json::parse(r.bytes(len, "config JSON")).get<ModelConfig>();
  } catch (const json::exception &e) {
    r.fail(std::string("malformed config JSON: ") + e.what());
  } catch (const ConfigError &e) {
    r.fail(std::string("invalid config: ") + e.what());
  }
  Model<Scalar> model(cfg, 0);
  auto inv = model.inventory();
  std::map<std::string, Tensor<Scalar> *> slots;
  for (auto &p : inv.params) slots[p.name] = &p.param->value();
  for (auto &b : inv.buffers) slots[b.name] = b.buffer;

  while (!r.at_end()) {
    const std::uint32_t name_len = r.u32();
    const std::string name(r.bytes(name_len, "entry name"));
    const auto it = slots.find(name);
    if (it == slots.end()) r.fail("unknown entry '" + name + "'");
    const Index rank = r.u8();
    Shape shape;
    for (Index i = 0; i < rank; ++i) shape.push_back(r.u32());
    Tensor<Scalar> &dst = *it->second;
    if (shape != dst.shape())
      r.fail("entry '" + name + "' has shape " + shape_string(shape) + ", model expects " + shape_string(dst.shape()));
    r.need(static_cast<std::size_t>(dst.size()) * 4, "entry data");
    for (Index i = 0; i < dst.size(); ++i) dst[i] = static_cast<Scalar>(r.f32());
    slots.erase(it);
  }
  if (!slots.empty()) r.fail("missing entry '" + slots.begin()->first + "'");
  return model;
}

template <typename Scalar>
void save_checkpoint(const std::string &path, Model<Scalar> &model) {
  write_file(path, encode_checkpoint(model));
}

template <typename Scalar>
Model<Scalar> load_checkpoint(const std::string &path) {
  return decode_checkpoint<Scalar>(read_file(path));
}

#define DGSTGCN_INSTANTIATE(S)                                                                                         \
  template struct Block<S>;                                                                                            \
  template class Model<S>;                                                                                             \
  template std::vector<S> person_weights<S>(const Tensor<S> &);                                                        \
  template void backward_and_step<S>(Model<S> &, const Var<S> &, const SgdOptions &);                                  \
  template std::string encode_checkpoint<S>(Model<S> &);                                                               \
  template Model<S> decode_checkpoint<S>(const std::string &);                                                         \
  template void save_checkpoint<S>(const std::string &, Model<S> &);                                                   \
  template Model<S> load_checkpoint<S>(const std::string &);
DGSTGCN_INSTANTIATE(float)
DGSTGCN_INSTANTIATE(double)
#undef DGSTGCN_INSTANTIATE

} // namespace dgstgcn
