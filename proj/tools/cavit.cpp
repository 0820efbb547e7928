// Command-line front end. Exit status: 0 success, 1 runtime failure, 2 usage error.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cavit/commands.hpp"
#include "cavit/errors.hpp"

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  // Subcommand flags that map onto config keys, applied after --set.
  std::vector<std::pair<std::string, std::string>> keyed;
};

void add_common(CLI::App* sub, Common& c, bool out_is_dir = true) {
  sub->add_option("-c,--config", c.config, "key=value config file ('#' starts a comment)")
      ->check(CLI::ExistingFile);
  sub->add_option("-s,--set", c.sets, "override one key, e.g. --set epochs=10 (repeatable, last wins)")
      ->type_name("KEY=VALUE");
  if (out_is_dir) sub->add_option("-o,--out", c.out, "artifact directory (config key 'out')");
}

cavit::RunConfig resolve(const Common& c) {
  cavit::RunConfig rc;
  if (!c.config.empty()) rc.apply_file(c.config);
  if (!c.out.empty()) rc.set("out", c.out, cavit::Source::kFlag);
  for (const auto& s : c.sets) rc.apply_override(s);
  for (const auto& [k, v] : c.keyed) rc.set(k, v, cavit::Source::kFlag);
  if (const char* env = std::getenv("CAVIT_SEED"); env && *env)
    rc.set("seed", env, cavit::Source::kEnv);
  rc.model.validate();
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vision transformer with channel attention: data, training, cost and attention tools"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every subcommand");
  std::string keys;
  for (const auto& k : cavit::RunConfig::keys()) keys += (keys.empty() ? "" : ", ") + k;
  app.footer("Config keys (file or --set): " + keys + "\nCAVIT_SEED overrides seed.");

  Common common;
  std::function<int(const cavit::RunConfig&)> action;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, common);
  std::optional<std::string> kind, output;
  std::optional<std::size_t> count;
  gen->add_option("--kind", kind, "bars or blobs (config key synthetic_kind)");
  gen->add_option("--count", count, "number of samples (config key synthetic_count)");
  gen->add_option("--output", output, "dataset path (config key data)");
  gen->callback([&] {
    if (kind) common.keyed.emplace_back("synthetic_kind", *kind);
    if (count) common.keyed.emplace_back("synthetic_count", std::to_string(*count));
    if (output) common.keyed.emplace_back("data", *output);
    action = [](const cavit::RunConfig& rc) { return cavit::cmd_gen_data(rc, std::cout); };
  });

  auto* train = app.add_subcommand("train", "train a model, writing history.csv and the best checkpoint");
  add_common(train, common);
  train->callback([&] {
    action = [](const cavit::RunConfig& rc) { return cavit::cmd_train(rc, std::cout); };
  });

  auto* eval = app.add_subcommand("eval", "top-1 accuracy of a checkpoint on a dataset");
  add_common(eval, common);
  std::optional<std::string> eval_ckpt;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path (config key checkpoint)");
  eval->callback([&] {
    if (eval_ckpt) common.keyed.emplace_back("checkpoint", *eval_ckpt);
    action = [](const cavit::RunConfig& rc) { return cavit::cmd_eval(rc, std::cout); };
  });

  auto* count_cmd = app.add_subcommand("count", "per-sublayer parameter and FLOP counts");
  add_common(count_cmd, common);
  cavit::CountOptions count_opts;
  count_cmd->add_flag("--elementwise", count_opts.elementwise,
                      "include norm, softmax, activation and add costs");
  count_cmd->add_flag("--compare", count_opts.compare, "report the reduction against baseline_vit");
  count_cmd->callback([&] {
    action = [&](const cavit::RunConfig& rc) { return cavit::cmd_count(rc, count_opts, std::cout); };
  });

  auto* grad = app.add_subcommand("gradcheck", "full-model finite-difference gradient check in 64-bit");
  add_common(grad, common);
  cavit::GradcheckOptions grad_opts;
  grad->add_option("--threshold", grad_opts.threshold, "maximum relative error")->capture_default_str();
  grad->callback([&] {
    action = [&](const cavit::RunConfig& rc) {
      return cavit::cmd_gradcheck(rc, grad_opts, std::cout);
    };
  });

  auto* attn = app.add_subcommand("attnmap", "export a head- and query-averaged spatial attention map");
  add_common(attn, common, false);
  cavit::AttnmapOptions attn_opts;
  std::optional<std::string> attn_ckpt, attn_out;
  std::optional<std::size_t> attn_block;
  attn->add_option("--checkpoint", attn_ckpt, "checkpoint path (config key checkpoint)");
  attn->add_option("--image-index", attn_opts.image_index, "sample index in the dataset")
      ->capture_default_str();
  attn->add_option("--block", attn_block, "block index (default: last)");
  attn->add_flag("--cls-row-only", attn_opts.cls_row_only, "use only the CLS query row");
  attn->add_option("-o,--out", attn_out, "output path prefix");
  attn->callback([&] {
    if (attn_ckpt) common.keyed.emplace_back("checkpoint", *attn_ckpt);
    attn_opts.block = attn_block;
    if (attn_out) attn_opts.prefix = *attn_out;
    action = [&](const cavit::RunConfig& rc) { return cavit::cmd_attnmap(rc, attn_opts, std::cout); };
  });

  auto* ablate = app.add_subcommand("ablate", "train all five variants and write ablation.csv");
  add_common(ablate, common);
  cavit::AblateOptions ablate_opts;
  ablate->add_flag("--parallel", ablate_opts.parallel, "train variants on separate threads");
  ablate->add_option("--mhsa-heads", ablate_opts.channel_mhsa_heads,
                     "channel heads for the channel_mhsa row")
      ->capture_default_str();
  ablate->callback([&] {
    action = [&](const cavit::RunConfig& rc) { return cavit::cmd_ablate(rc, ablate_opts, std::cout); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  cavit::RunConfig rc;
  try {
    rc = resolve(common);
  } catch (const cavit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
  std::cout << "# resolved config\n" << rc.to_text();

  try {
    return action(rc);
  } catch (const cavit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kRuntimeFailure;
}
