#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cavit/config.hpp"

namespace cavit {

struct CostEntry {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
};

/// Closed-form parameter and FLOP counts per sublayer of one configuration.
///
/// FLOPs are 2 x multiply-accumulates of one forward pass at batch 1 over
/// every linear projection and the two attention matmuls (q k^T, attn v).
/// Norms, softmax, activations, bias and residual adds are left out unless
/// FlopOptions::include_elementwise is set.
struct CostReport {
  ModelConfig config;
  std::vector<CostEntry> entries;

  std::uint64_t total_params() const;
  std::uint64_t total_flops() const;
};

struct FlopOptions {
  bool include_elementwise = false;
};

/// Per-element costs used when FlopOptions::include_elementwise is set.
inline constexpr std::uint64_t kLayerNormFlops = 5;  // mean, variance, normalize, scale, shift
inline constexpr std::uint64_t kSoftmaxFlops = 4;    // score scale, exp, sum, divide
inline constexpr std::uint64_t kGeluFlops = 8;
inline constexpr std::uint64_t kAddFlops = 1;        // bias, residual, positional

CostReport count_params(const ModelConfig& cfg);
CostReport count_flops(const ModelConfig& cfg, const FlopOptions& opts = {});

/// Parameter and FLOP cost of one block of `cfg` (the depth increment).
CostEntry block_cost(const ModelConfig& cfg, const FlopOptions& opts = {});

struct Reduction {
  double params = 0;  // 1 - other/base
  double flops = 0;
};

Reduction relative_reduction(const CostReport& base, const CostReport& other);

/// Aligned human-readable table with a totals row.
std::string format_table(const CostReport& r);
/// "sublayer,params,flops" header, one row per entry, then a "total" row.
std::string to_csv(const CostReport& r);

}  // namespace cavit
