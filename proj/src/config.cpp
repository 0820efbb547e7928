#include "cavit/config.hpp"

#include <cmath>

#include "cavit/errors.hpp"

namespace cavit {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kBaselineVit: return "baseline_vit";
    case Variant::kCavit: return "cavit";
    case Variant::kChannelMhsa: return "channel_mhsa";
    case Variant::kChannelOnly: return "channel_only";
    case Variant::kClsSwapped: return "cls_swapped";
  }
  return "unknown";
}

std::string_view to_string(ClsProjection p) {
  return p == ClsProjection::kIdentity ? "identity_when_C_equals_N" : "learned_linear";
}

Variant parse_variant(std::string_view s) {
  for (auto v : kAllVariants)
    if (to_string(v) == s) return v;
  throw ConfigError("unknown variant '" + std::string(s) +
                    "' (expected baseline_vit, cavit, channel_mhsa, channel_only or cls_swapped)");
}

ClsProjection parse_cls_projection(std::string_view s) {
  if (s == "identity_when_C_equals_N" || s == "identity") return ClsProjection::kIdentity;
  if (s == "learned_linear" || s == "learned") return ClsProjection::kLearnedLinear;
  throw ConfigError("unknown cls_projection '" + std::string(s) +
                    "' (expected identity_when_C_equals_N or learned_linear)");
}

std::size_t ModelConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::floor(mlp_ratio * static_cast<double>(embed_dim)));
}

bool ModelConfig::has_mlp() const {
  return variant == Variant::kBaselineVit || variant == Variant::kChannelOnly;
}

bool ModelConfig::has_channel_stage() const { return variant != Variant::kBaselineVit; }

bool ModelConfig::has_spatial_stage() const { return variant != Variant::kChannelOnly; }

bool ModelConfig::uses_cls_split() const {
  return variant == Variant::kCavit || variant == Variant::kChannelMhsa ||
         variant == Variant::kChannelOnly;
}

bool ModelConfig::has_cls_projection() const {
  return uses_cls_split() && cls_projection == ClsProjection::kLearnedLinear;
}

std::size_t ModelConfig::channel_stage_heads() const {
  return variant == Variant::kChannelMhsa ? channel_heads : 1;
}

std::size_t ModelConfig::channel_width() const {
  if (!has_channel_stage()) return 0;
  return variant == Variant::kClsSwapped ? num_patches() + 1 : num_patches();
}

std::size_t ModelConfig::channel_norm_width() const {
  return channel_width();
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (image_size == 0 || patch_size == 0) fail("image_size and patch_size must be positive");
  if (image_size % patch_size != 0)
    fail("image_size " + std::to_string(image_size) + " is not divisible by patch_size " +
         std::to_string(patch_size));
  if (embed_dim == 0) fail("embed_dim must be positive");
  if (spatial_heads == 0 || channel_heads == 0) fail("head counts must be positive");
  if (n_classes == 0) fail("n_classes must be positive");
  if (in_channels != 1 && in_channels != 3) fail("in_channels must be 1 or 3");
  if (has_spatial_stage() && embed_dim % spatial_heads != 0)
    fail("embed_dim " + std::to_string(embed_dim) + " is not divisible by spatial_heads " +
         std::to_string(spatial_heads));
  if (has_mlp() && !(mlp_ratio > 0 && mlp_hidden() >= 1))
    fail("mlp_ratio must give a hidden width of at least 1");
  const std::size_t cw = channel_width();
  if (has_channel_stage() && cw % channel_stage_heads() != 0)
    fail("channel width " + std::to_string(cw) + " is not divisible by channel_heads " +
         std::to_string(channel_stage_heads()));
  if (uses_cls_split() && cls_projection == ClsProjection::kIdentity &&
      embed_dim != num_patches())
    fail("cls_projection identity_when_C_equals_N needs embed_dim == num_patches, got C=" +
         std::to_string(embed_dim) + ", N=" + std::to_string(num_patches()));
}

ModelConfig ModelConfig::desk(Variant v) {
  ModelConfig c;
  c.variant = v;
  return c;
}

ModelConfig ModelConfig::paper_scale(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.image_size = 224;
  c.patch_size = 16;
  c.embed_dim = 192;
  c.depth = 12;
  c.spatial_heads = 3;
  c.channel_heads = v == Variant::kChannelMhsa ? 4 : 1;
  c.mlp_ratio = 4.0;
  c.n_classes = 1000;
  c.in_channels = 3;
  c.cls_projection = ClsProjection::kLearnedLinear;
  return c;
}

ModelConfig ModelConfig::gradcheck(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.image_size = 8;
  c.patch_size = 4;
  c.embed_dim = 4;
  c.depth = 1;
  c.spatial_heads = 1;
  c.channel_heads = v == Variant::kChannelMhsa ? 2 : 1;
  c.n_classes = 2;
  return c;
}

}  // namespace cavit
