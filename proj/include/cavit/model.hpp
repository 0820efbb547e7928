#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cavit/attention.hpp"
#include "cavit/config.hpp"
#include "cavit/params.hpp"

namespace cavit {

/// Linear map carrying the CLS row across the dimension swap. Both Vars
/// invalid means the identity reinterpretation (only legal when C == N).
template <typename T>
struct ClsMap {
  Var<T> weight;
  Var<T> bias;
  bool identity() const { return !weight.valid(); }
};

template <typename T>
struct NormParams {
  Var<T> gamma, beta;
};

template <typename T>
struct MlpParams {
  Var<T> fc1_w, fc1_b, fc2_w, fc2_b;
};

/// One block's parameters. Members a variant does not use stay invalid.
template <typename T>
struct BlockParams {
  NormParams<T> norm1;
  AttentionWeights<T> attn;
  NormParams<T> norm2;
  MlpParams<T> mlp;
  NormParams<T> chan_norm;
  AttentionWeights<T> chan_attn;
  ClsMap<T> cls_in, cls_out;

  static BlockParams from(const BoundParams<T>& bound, std::size_t block);
};

template <typename T>
struct BlockOutput {
  Var<T> y;
  Var<T> spatial_map;  // [B,H,N+1,N+1]; invalid for channel_only
  Var<T> channel_map;  // [B,h,C(+1),C(+1)]; invalid for baseline_vit
};

/// [B,in_channels,W,W] -> [B,N,C]: split into patches, project linearly.
template <typename T>
Var<T> patch_embed(Var<T> images, Var<T> weight, Var<T> bias, std::size_t patch);

/// Prepend the CLS token (broadcast over the batch) and add positional embeddings.
template <typename T>
Var<T> add_cls_and_pos(Var<T> tokens, Var<T> cls, Var<T> pos);

/// [B,N+1,C] -> [B,C+1,N]: spatial tokens transposed so channels become
/// tokens; the CLS row is mapped to length N and kept first.
template <typename T>
Var<T> swap_in(Var<T> x, const ClsMap<T>& cls_proj);

/// [B,C+1,N] -> [B,N+1,C], the structural inverse of swap_in.
template <typename T>
Var<T> swap_out(Var<T> y, const ClsMap<T>& cls_unproj);

template <typename T>
Var<T> mlp(Var<T> x, const MlpParams<T>& p);

template <typename T>
BlockOutput<T> vit_block(Var<T> x, const BlockParams<T>& p, const ModelConfig& cfg);

/// Spatial MHSA, then single-head attention over the swapped (channel) layout.
template <typename T>
BlockOutput<T> cavit_block(Var<T> x, const BlockParams<T>& p, const ModelConfig& cfg);

/// Dispatches on cfg.variant. Shape-preserving [B,N+1,C] -> [B,N+1,C].
template <typename T>
BlockOutput<T> variant_block(Var<T> x, const BlockParams<T>& p, const ModelConfig& cfg);

template <typename T>
struct ForwardResult {
  Var<T> logits;  // [B,n_classes]
  std::vector<BlockOutput<T>> blocks;
};

/// Draws from N(0, sigma) truncated to [-2 sigma, 2 sigma].
template <typename T>
Tensor<T> trunc_normal(Shape dims, double sigma, std::mt19937_64& rng);

/// Creates the parameter set of `cfg` in canonical order.
template <typename T>
ParamStore<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg, std::uint64_t seed = 42);
  Model(ModelConfig cfg, ParamStore<T> params);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParamStore<T>& params() noexcept { return params_; }
  const ParamStore<T>& params() const noexcept { return params_; }

  ForwardResult<T> forward(Var<T> images, const BoundParams<T>& bound) const;

  /// Forward on a throwaway tape.
  Tensor<T> logits(const Tensor<T>& images) const;

 private:
  ModelConfig cfg_;
  ParamStore<T> params_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace cavit
