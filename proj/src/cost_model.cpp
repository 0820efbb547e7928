#include "cavit/cost_model.hpp"

#include <algorithm>
#include <cstdio>

namespace cavit {

namespace {

using u64 = std::uint64_t;

u64 attention_params(u64 width, bool bias) { return 4 * width * width + (bias ? 4 * width : 0); }

// Projections on `tokens` rows of `width`, plus q k^T and attn v.
u64 attention_macs(u64 tokens, u64 width) {
  return 4 * tokens * width * width + 2 * tokens * tokens * width;
}

u64 attention_elementwise(u64 tokens, u64 width, bool bias) {
  return tokens * tokens * kSoftmaxFlops + (bias ? 4 * tokens * width * kAddFlops : 0);
}

std::vector<CostEntry> analyze(const ModelConfig& cfg, const FlopOptions& opts) {
  cfg.validate();
  const bool ew = opts.include_elementwise;
  const u64 C = cfg.embed_dim, N = cfg.num_patches(), F = cfg.patch_features();
  const u64 K = cfg.n_classes, H = cfg.mlp_hidden(), T = N + 1;
  std::vector<CostEntry> out;

  out.push_back({"patch_embed", F * C + C, 2 * N * F * C + (ew ? N * C * kAddFlops : 0)});
  out.push_back({"cls_token", C, 0});
  out.push_back({"pos_embed", T * C, ew ? T * C * kAddFlops : 0});

  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    if (cfg.has_spatial_stage()) {
      out.push_back({p + "norm1", 2 * C, ew ? T * C * kLayerNormFlops : 0});
      out.push_back({p + "attn", attention_params(C, true),
                     2 * attention_macs(T, C) +
                         (ew ? attention_elementwise(T, C, true) + T * C * kAddFlops : 0)});
    }
    if (cfg.has_cls_projection())
      out.push_back({p + "cls_proj", 2 * C * N + N + C, 2 * (C * N + N * C) + (ew ? N + C : 0)});
    if (cfg.channel_norm_width() > 0) {
      const u64 w = cfg.channel_norm_width();
      // Normalized rows: C+1 with the CLS row split off, C when it is transposed along.
      const u64 rows = cfg.variant == Variant::kClsSwapped ? C : C + 1;
      out.push_back({p + "chan_norm", 2 * w, ew ? rows * w * kLayerNormFlops : 0});
    }
    if (cfg.has_channel_stage()) {
      const u64 w = cfg.channel_width();
      const u64 tokens = cfg.variant == Variant::kClsSwapped ? C : C + 1;
      out.push_back({p + "chan_attn", attention_params(w, cfg.channel_bias),
                     2 * attention_macs(tokens, w) +
                         (ew ? attention_elementwise(tokens, w, cfg.channel_bias) +
                                   T * C * kAddFlops
                             : 0)});
    }
    if (cfg.has_mlp()) {
      out.push_back({p + "norm2", 2 * C, ew ? T * C * kLayerNormFlops : 0});
      out.push_back({p + "mlp", C * H + H + H * C + C,
                     2 * 2 * T * C * H +
                         (ew ? T * H * (kGeluFlops + kAddFlops) + 2 * T * C * kAddFlops : 0)});
    }
  }
  // Only the CLS row reaches the final norm and the head.
  out.push_back({"norm", 2 * C, ew ? C * kLayerNormFlops : 0});
  out.push_back({"head", C * K + K, 2 * C * K + (ew ? K * kAddFlops : 0)});
  return out;
}

}  // namespace

u64 CostReport::total_params() const {
  u64 s = 0;
  for (const auto& e : entries) s += e.params;
  return s;
}

u64 CostReport::total_flops() const {
  u64 s = 0;
  for (const auto& e : entries) s += e.flops;
  return s;
}

CostReport count_params(const ModelConfig& cfg) { return {cfg, analyze(cfg, {})}; }

CostReport count_flops(const ModelConfig& cfg, const FlopOptions& opts) {
  return {cfg, analyze(cfg, opts)};
}

CostEntry block_cost(const ModelConfig& cfg, const FlopOptions& opts) {
  ModelConfig one = cfg;
  one.depth = 1;
  CostEntry e{"block", 0, 0};
  for (const auto& entry : analyze(one, opts))
    if (entry.name.starts_with("blocks.")) {
      e.params += entry.params;
      e.flops += entry.flops;
    }
  return e;
}

Reduction relative_reduction(const CostReport& base, const CostReport& other) {
  auto rel = [](u64 b, u64 o) {
    return b == 0 ? 0.0 : 1.0 - static_cast<double>(o) / static_cast<double>(b);
  };
  return {rel(base.total_params(), other.total_params()),
          rel(base.total_flops(), other.total_flops())};
}

std::string format_table(const CostReport& r) {
  std::size_t w = 8;
  for (const auto& e : r.entries) w = std::max(w, e.name.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s %14s %16s\n", static_cast<int>(w), "sublayer", "params",
                "flops");
  out += line;
  for (const auto& e : r.entries) {
    std::snprintf(line, sizeof line, "%-*s %14llu %16llu\n", static_cast<int>(w), e.name.c_str(),
                  static_cast<unsigned long long>(e.params),
                  static_cast<unsigned long long>(e.flops));
    out += line;
  }
  std::snprintf(line, sizeof line, "%-*s %14llu %16llu\n", static_cast<int>(w), "total",
                static_cast<unsigned long long>(r.total_params()),
                static_cast<unsigned long long>(r.total_flops()));
  out += line;
  return out;
}

std::string to_csv(const CostReport& r) {
  std::string out = "sublayer,params,flops\n";
  for (const auto& e : r.entries)
    out += e.name + "," + std::to_string(e.params) + "," + std::to_string(e.flops) + "\n";
  out += "total," + std::to_string(r.total_params()) + "," + std::to_string(r.total_flops()) + "\n";
  return out;
}

}  // namespace cavit
