#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace cavit {

enum class Variant {
  kBaselineVit,  // spatial MHSA -> MLP
  kCavit,        // spatial MHSA -> channel SHSA with the CLS row kept apart
  kChannelMhsa,  // as kCavit, channel stage split into channel_heads heads
  kChannelOnly,  // channel SHSA -> MLP
  kClsSwapped,   // as kCavit, but the CLS row is transposed with the rest
};

/// How the CLS row is carried across the dimension swap.
enum class ClsProjection {
  kIdentity,       // reinterpret [1,C] as [1,N]; needs C == N
  kLearnedLinear,  // learned C->N on the way in, N->C on the way out
};

std::string_view to_string(Variant v);
std::string_view to_string(ClsProjection p);
Variant parse_variant(std::string_view s);
ClsProjection parse_cls_projection(std::string_view s);

inline constexpr Variant kAllVariants[] = {Variant::kBaselineVit, Variant::kCavit,
                                           Variant::kChannelMhsa, Variant::kChannelOnly,
                                           Variant::kClsSwapped};

struct ModelConfig {
  Variant variant = Variant::kCavit;
  std::size_t image_size = 32;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 16;
  std::size_t depth = 2;
  std::size_t spatial_heads = 2;
  /// Only read by kChannelMhsa; every other channel stage is single-head.
  std::size_t channel_heads = 1;
  double mlp_ratio = 4.0;
  std::size_t n_classes = 2;
  std::size_t in_channels = 1;
  ClsProjection cls_projection = ClsProjection::kIdentity;
  /// Biases on the channel-stage Q/K/V/O projections.
  bool channel_bias = true;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t patch_features() const { return in_channels * patch_size * patch_size; }
  std::size_t mlp_hidden() const;
  bool has_mlp() const;
  bool has_channel_stage() const;
  bool has_spatial_stage() const;
  /// Channel attention with the CLS row split off (swap_in / swap_out).
  bool uses_cls_split() const;
  bool has_cls_projection() const;
  std::size_t channel_stage_heads() const;
  /// Width of the channel stage's tokens: N, or N+1 when the CLS row is swapped.
  std::size_t channel_width() const;
  /// Width of the channel norm, or 0 when the variant has none.
  std::size_t channel_norm_width() const;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;

  /// W=32, w=8, N=C=16, depth 2, two spatial heads, two classes, grayscale.
  static ModelConfig desk(Variant v = Variant::kCavit);
  /// W=224, w=16, C=192, depth 12, three heads, mlp_ratio 4, 1000 classes, RGB.
  static ModelConfig paper_scale(Variant v = Variant::kBaselineVit);
  /// W=8, w=4, N=C=4, depth 1, one head, two classes.
  static ModelConfig gradcheck(Variant v = Variant::kCavit);
};

}  // namespace cavit
