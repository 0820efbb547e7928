#include "cavit/model.hpp"

namespace cavit {

namespace {

template <typename T>
AttentionWeights<T> attention_from(const BoundParams<T>& b, const std::string& prefix) {
  AttentionWeights<T> w;
  w.w_q = b[prefix + ".w_q"];
  w.w_k = b[prefix + ".w_k"];
  w.w_v = b[prefix + ".w_v"];
  w.w_o = b[prefix + ".w_o"];
  w.b_q = b.optional(prefix + ".b_q");
  w.b_k = b.optional(prefix + ".b_k");
  w.b_v = b.optional(prefix + ".b_v");
  w.b_o = b.optional(prefix + ".b_o");
  return w;
}

template <typename T>
NormParams<T> norm_from(const BoundParams<T>& b, const std::string& prefix) {
  return {b.optional(prefix + ".gamma"), b.optional(prefix + ".beta")};
}

template <typename T>
Var<T> apply_norm(Var<T> x, const NormParams<T>& n) {
  return layernorm(x, n.gamma, n.beta);
}

}  // namespace

template <typename T>
BlockParams<T> BlockParams<T>::from(const BoundParams<T>& b, std::size_t block) {
  const std::string p = "blocks." + std::to_string(block) + ".";
  BlockParams<T> out;
  out.norm1 = norm_from(b, p + "norm1");
  out.norm2 = norm_from(b, p + "norm2");
  out.chan_norm = norm_from(b, p + "chan_norm");
  if (b.optional(p + "attn.w_q").valid()) out.attn = attention_from(b, p + "attn");
  if (b.optional(p + "chan_attn.w_q").valid()) out.chan_attn = attention_from(b, p + "chan_attn");
  if (b.optional(p + "mlp.fc1.weight").valid())
    out.mlp = {b[p + "mlp.fc1.weight"], b[p + "mlp.fc1.bias"], b[p + "mlp.fc2.weight"],
               b[p + "mlp.fc2.bias"]};
  out.cls_in = {b.optional(p + "cls_in.weight"), b.optional(p + "cls_in.bias")};
  out.cls_out = {b.optional(p + "cls_out.weight"), b.optional(p + "cls_out.bias")};
  return out;
}

template <typename T>
Var<T> patch_embed(Var<T> images, Var<T> weight, Var<T> bias, std::size_t patch) {
  auto patches = extract_patches(images, patch);
  if (weight.value().rank() != 2 || weight.dim(0) != patches.dim(-1))
    throw DimensionError("patch projection " + shape_str(weight.dims()) + " does not fit " +
                         std::to_string(patches.dim(-1)) + " patch features");
  return linear(patches, weight, bias);
}

template <typename T>
Var<T> add_cls_and_pos(Var<T> tokens, Var<T> cls, Var<T> pos) {
  if (tokens.value().rank() != 3)
    throw RankError("tokens must be [B,N,C], got " + shape_str(tokens.dims()));
  const std::size_t B = tokens.dim(0), N = tokens.dim(1), C = tokens.dim(2);
  if (cls.dims() != Shape{1, 1, C})
    throw DimensionError("cls token " + shape_str(cls.dims()) + " does not match width " +
                         std::to_string(C));
  if (pos.dims() != Shape{1, N + 1, C})
    throw DimensionError("positional embedding " + shape_str(pos.dims()) + " does not match " +
                         shape_str({1, N + 1, C}));
  return add(concat_axis1(broadcast_batch(cls, B), tokens), pos);
}

template <typename T>
Var<T> swap_in(Var<T> x, const ClsMap<T>& cls_proj) {
  if (x.value().rank() != 3) throw RankError("swap_in needs [B,N+1,C], got " + shape_str(x.dims()));
  const std::size_t B = x.dim(0), N = x.dim(1) - 1, C = x.dim(2);
  auto [cls, spatial] = split_axis1(x, 1);
  Var<T> cls_row;
  if (cls_proj.identity()) {
    if (C != N)
      throw ConfigError("identity CLS mapping needs C == N, got C=" + std::to_string(C) +
                        ", N=" + std::to_string(N));
    cls_row = cls;
  } else {
    cls_row = matmul(cls, cls_proj.weight);
    if (cls_proj.bias.valid()) cls_row = add(cls_row, cls_proj.bias);
    if (cls_row.dims() != Shape{B, 1, N})
      throw DimensionError("CLS projection gives " + shape_str(cls_row.dims()) + ", expected " +
                           shape_str({B, 1, N}));
  }
  return concat_axis1(cls_row, transpose_last2(spatial));
}

template <typename T>
Var<T> swap_out(Var<T> y, const ClsMap<T>& cls_unproj) {
  if (y.value().rank() != 3)
    throw RankError("swap_out needs [B,C+1,N], got " + shape_str(y.dims()));
  const std::size_t B = y.dim(0), C = y.dim(1) - 1, N = y.dim(2);
  auto [cls, channels] = split_axis1(y, 1);
  Var<T> cls_row;
  if (cls_unproj.identity()) {
    if (C != N)
      throw ConfigError("identity CLS mapping needs C == N, got C=" + std::to_string(C) +
                        ", N=" + std::to_string(N));
    cls_row = cls;
  } else {
    cls_row = matmul(cls, cls_unproj.weight);
    if (cls_unproj.bias.valid()) cls_row = add(cls_row, cls_unproj.bias);
    if (cls_row.dims() != Shape{B, 1, C})
      throw DimensionError("CLS projection gives " + shape_str(cls_row.dims()) + ", expected " +
                           shape_str({B, 1, C}));
  }
  return concat_axis1(cls_row, transpose_last2(channels));
}

template <typename T>
Var<T> mlp(Var<T> x, const MlpParams<T>& p) {
  return linear(gelu(linear(x, p.fc1_w, p.fc1_b)), p.fc2_w, p.fc2_b);
}

namespace {

template <typename T>
AttentionOutput<T> spatial_attention(Var<T> x, const BlockParams<T>& p, const ModelConfig& cfg) {
  return mhsa(apply_norm(x, p.norm1), p.attn, cfg.spatial_heads);
}

// Channel stage over the CLS-split swapped layout; returns the residual branch.
template <typename T>
AttentionOutput<T> split_channel_attention(Var<T> u, const BlockParams<T>& p,
                                           const ModelConfig& cfg) {
  auto swapped = apply_norm(swap_in(u, p.cls_in), p.chan_norm);
  auto att = mhsa(swapped, p.chan_attn, cfg.channel_stage_heads());
  return {swap_out(att.values, p.cls_out), att.maps};
}

template <typename T>
BlockOutput<T> channel_only_block(Var<T> x, const BlockParams<T>& p) {
  auto att = shsa(apply_norm(swap_in(x, p.cls_in), p.chan_norm), p.chan_attn);
  auto u = add(x, swap_out(att.values, p.cls_out));
  auto y = add(u, mlp(apply_norm(u, p.norm2), p.mlp));
  return {y, Var<T>(), att.maps};
}

template <typename T>
BlockOutput<T> cls_swapped_block(Var<T> x, const BlockParams<T>& p, const ModelConfig& cfg) {
  auto sp = spatial_attention(x, p, cfg);
  auto u = add(x, sp.values);
  auto transposed = apply_norm(transpose_last2(u), p.chan_norm);
  auto ch = mhsa(transposed, p.chan_attn, cfg.channel_stage_heads());
  auto y = add(u, transpose_last2(ch.values));
  return {y, sp.maps, ch.maps};
}

}  // namespace

template <typename T>
BlockOutput<T> vit_block(Var<T> x, const BlockParams<T>& p, const ModelConfig& cfg) {
  auto sp = spatial_attention(x, p, cfg);
  auto u = add(x, sp.values);
  auto y = add(u, mlp(apply_norm(u, p.norm2), p.mlp));
  return {y, sp.maps, Var<T>()};
}

template <typename T>
BlockOutput<T> cavit_block(Var<T> x, const BlockParams<T>& p, const ModelConfig& cfg) {
  auto sp = spatial_attention(x, p, cfg);
  auto u = add(x, sp.values);
  auto ch = split_channel_attention(u, p, cfg);
  return {add(u, ch.values), sp.maps, ch.maps};
}

template <typename T>
BlockOutput<T> variant_block(Var<T> x, const BlockParams<T>& p, const ModelConfig& cfg) {
  switch (cfg.variant) {
    case Variant::kBaselineVit: return vit_block(x, p, cfg);
    case Variant::kCavit:
    case Variant::kChannelMhsa: return cavit_block(x, p, cfg);
    case Variant::kChannelOnly: return channel_only_block(x, p);
    case Variant::kClsSwapped: return cls_swapped_block(x, p, cfg);
  }
  throw ConfigError("unhandled variant");
}

template <typename T>
Tensor<T> trunc_normal(Shape dims, double sigma, std::mt19937_64& rng) {
  Tensor<T> t(std::move(dims));
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& v : t.data()) {
    double s;
    do {
      s = dist(rng);
    } while (std::abs(s) > 2 * sigma);
    v = static_cast<T>(s);
  }
  return t;
}

namespace {

inline constexpr double kInitSigma = 0.02;

template <typename T>
void add_norm(ParamStore<T>& s, const std::string& prefix, std::size_t width) {
  s.add(prefix + ".gamma", Tensor<T>::ones({width}));
  s.add(prefix + ".beta", Tensor<T>::zeros({width}));
}

template <typename T>
void add_linear(ParamStore<T>& s, const std::string& prefix, std::size_t in, std::size_t out,
                std::mt19937_64& rng) {
  s.add(prefix + ".weight", trunc_normal<T>({in, out}, kInitSigma, rng));
  s.add(prefix + ".bias", Tensor<T>::zeros({out}));
}

template <typename T>
void add_attention(ParamStore<T>& s, const std::string& prefix, std::size_t width, bool bias,
                   std::mt19937_64& rng) {
  for (const char* n : {"q", "k", "v", "o"}) {
    s.add(prefix + ".w_" + n, trunc_normal<T>({width, width}, kInitSigma, rng));
    if (bias) s.add(prefix + ".b_" + n, Tensor<T>::zeros({width}));
  }
}

}  // namespace

template <typename T>
ParamStore<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::size_t C = cfg.embed_dim, N = cfg.num_patches();
  ParamStore<T> s;
  add_linear(s, "patch_embed", cfg.patch_features(), C, rng);
  s.add("cls_token", trunc_normal<T>({1, 1, C}, kInitSigma, rng));
  s.add("pos_embed", trunc_normal<T>({1, N + 1, C}, kInitSigma, rng));
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    if (cfg.has_spatial_stage()) {
      add_norm(s, p + "norm1", C);
      add_attention(s, p + "attn", C, true, rng);
    }
    if (cfg.has_cls_projection()) {
      add_linear(s, p + "cls_in", C, N, rng);
      add_linear(s, p + "cls_out", N, C, rng);
    }
    if (cfg.channel_norm_width() > 0) add_norm(s, p + "chan_norm", cfg.channel_norm_width());
    if (cfg.has_channel_stage())
      add_attention(s, p + "chan_attn", cfg.channel_width(), cfg.channel_bias, rng);
    if (cfg.has_mlp()) {
      add_norm(s, p + "norm2", C);
      add_linear(s, p + "mlp.fc1", C, cfg.mlp_hidden(), rng);
      add_linear(s, p + "mlp.fc2", cfg.mlp_hidden(), C, rng);
    }
  }
  add_norm(s, "norm", C);
  add_linear(s, "head", C, cfg.n_classes, rng);
  return s;
}

template <typename T>
Model<T>::Model(ModelConfig cfg, std::uint64_t seed)
    : cfg_(cfg), params_(init_params<T>(cfg, seed)) {}

template <typename T>
Model<T>::Model(ModelConfig cfg, ParamStore<T> params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const auto expected = init_params<T>(cfg_, 0);
  if (expected.size() != params_.size())
    throw ConfigError("parameter set has " + std::to_string(params_.size()) +
                      " tensors, config needs " + std::to_string(expected.size()));
  for (const auto& e : expected.entries()) {
    if (!params_.contains(e.name)) throw ConfigError("missing parameter '" + e.name + "'");
    if (params_.value(e.name).dims() != e.value.dims())
      throw ConfigError("parameter '" + e.name + "' has shape " +
                        shape_str(params_.value(e.name).dims()) + ", config needs " +
                        shape_str(e.value.dims()));
  }
}

template <typename T>
ForwardResult<T> Model<T>::forward(Var<T> images, const BoundParams<T>& b) const {
  const Shape want{images.dim(0), cfg_.in_channels, cfg_.image_size, cfg_.image_size};
  if (images.dims() != want)
    throw DimensionError("images " + shape_str(images.dims()) + " do not match config " +
                         shape_str(want));
  ForwardResult<T> r;
  auto tokens = patch_embed(images, b["patch_embed.weight"], b["patch_embed.bias"],
                            cfg_.patch_size);
  auto x = add_cls_and_pos(tokens, b["cls_token"], b["pos_embed"]);
  for (std::size_t i = 0; i < cfg_.depth; ++i) {
    auto out = variant_block(x, BlockParams<T>::from(b, i), cfg_);
    x = out.y;
    r.blocks.push_back(out);
  }
  // The head only reads CLS, and the final norm is per-token.
  auto cls = layernorm(slice_axis1(x, 0, 1), b["norm.gamma"], b["norm.beta"]);
  cls = reshape(cls, {images.dim(0), cfg_.embed_dim});
  r.logits = linear(cls, b["head.weight"], b["head.bias"]);
  return r;
}

template <typename T>
Tensor<T> Model<T>::logits(const Tensor<T>& images) const {
  Tape<T> tape;
  auto bound = params_.bind(tape);
  return forward(tape.leaf(images), bound).logits.value();
}

#define CAVIT_INSTANTIATE_MODEL(T)                                                      \
  template struct BlockParams<T>;                                                       \
  template Var<T> patch_embed(Var<T>, Var<T>, Var<T>, std::size_t);                     \
  template Var<T> add_cls_and_pos(Var<T>, Var<T>, Var<T>);                              \
  template Var<T> swap_in(Var<T>, const ClsMap<T>&);                                    \
  template Var<T> swap_out(Var<T>, const ClsMap<T>&);                                   \
  template Var<T> mlp(Var<T>, const MlpParams<T>&);                                     \
  template BlockOutput<T> vit_block(Var<T>, const BlockParams<T>&, const ModelConfig&); \
  template BlockOutput<T> cavit_block(Var<T>, const BlockParams<T>&, const ModelConfig&); \
  template BlockOutput<T> variant_block(Var<T>, const BlockParams<T>&, const ModelConfig&); \
  template Tensor<T> trunc_normal(Shape, double, std::mt19937_64&);                     \
  template ParamStore<T> init_params(const ModelConfig&, std::uint64_t);                \
  template class Model<T>;

CAVIT_INSTANTIATE_MODEL(float)
CAVIT_INSTANTIATE_MODEL(double)

#undef CAVIT_INSTANTIATE_MODEL

}  // namespace cavit
