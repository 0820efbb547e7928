#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>

#include "cavit/run_config.hpp"

namespace cavit {

// Subcommand bodies. Each returns the process exit status on a normal
// finish and throws cavit::Error on failure; artifacts go under rc.out
// unless a path is given explicitly.

/// Writes a synthetic dataset to rc.data, or <out>/data.cavd when unset.
int cmd_gen_data(const RunConfig& rc, std::ostream& out);

/// Trains on rc.data (validation: rc.val_data, else a seeded split) and
/// writes <out>/history.csv, <out>/config.txt and the best checkpoint.
int cmd_train(const RunConfig& rc, std::ostream& out);

/// Top-1 accuracy of the checkpoint on rc.data.
int cmd_eval(const RunConfig& rc, std::ostream& out);

struct CountOptions {
  bool elementwise = false;
  bool compare = false;  // also report the reduction against baseline_vit
};
/// Prints the per-sublayer table and writes <out>/cost_<variant>.csv.
int cmd_count(const RunConfig& rc, const CountOptions& opts, std::ostream& out);

struct GradcheckOptions {
  double threshold = 1e-4;
};
/// 0 when every parameter group is within the threshold, 1 otherwise.
int cmd_gradcheck(const RunConfig& rc, const GradcheckOptions& opts, std::ostream& out);

struct AttnmapOptions {
  std::size_t image_index = 0;
  std::optional<std::size_t> block;  // default: last
  bool cls_row_only = false;
  std::filesystem::path prefix;      // default: <out>/attn_<image>_b<block>
};
int cmd_attnmap(const RunConfig& rc, const AttnmapOptions& opts, std::ostream& out);

struct AblateOptions {
  bool parallel = false;
  std::size_t channel_mhsa_heads = 2;
};
/// Trains every variant on one split with one seed; writes <out>/ablation.csv
/// (variant,accuracy,params,flops), accuracy being the best validation score.
int cmd_ablate(const RunConfig& rc, const AblateOptions& opts, std::ostream& out);

}  // namespace cavit
