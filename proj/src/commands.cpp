#include "cavit/commands.hpp"

#include <cstdio>
#include <thread>

#include "cavit/attnviz.hpp"
#include "cavit/binary_io.hpp"
#include "cavit/checkpoint.hpp"
#include "cavit/cost_model.hpp"
#include "cavit/errors.hpp"
#include "cavit/gradcheck.hpp"

namespace cavit {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::filesystem::path data_path(const RunConfig& rc) {
  return rc.data.empty() ? rc.out / "data.cavd" : rc.data;
}

std::pair<Dataset, Dataset> load_split(const RunConfig& rc) {
  Dataset d = load_dataset(data_path(rc));
  if (!rc.val_data.empty()) return {std::move(d), load_dataset(rc.val_data)};
  return split_train_val(d, rc.train.seed, rc.val_fraction);
}

template <typename T>
Model<T> load_model(const RunConfig& rc) {
  ParamStore<float> store = init_params<float>(rc.model, rc.train.seed);
  load_checkpoint(store, rc.checkpoint_path());
  return Model<T>(rc.model, store.template cast<T>());
}

template <typename T>
TrainResult train_as(const ModelConfig& cfg, const Dataset& tr, const Dataset& va,
                     const TrainConfig& tc, const EpochCallback& cb) {
  Model<T> model(cfg, tc.seed);
  return train(model, tr, va, tc, cb);
}

TrainResult train_with_precision(const ModelConfig& cfg, const Dataset& tr, const Dataset& va,
                                 const TrainConfig& tc, const EpochCallback& cb) {
  return tc.precision == Precision::kF64 ? train_as<double>(cfg, tr, va, tc, cb)
                                         : train_as<float>(cfg, tr, va, tc, cb);
}

std::string epoch_line(const EpochRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "epoch %4zu  loss %.6f  train_acc %.4f  val_acc %.4f\n", r.epoch,
                r.loss, r.train_acc, r.val_acc);
  return buf;
}

template <typename T>
int attnmap_as(const RunConfig& rc, const AttnmapOptions& opts, std::ostream& out) {
  if (!rc.model.has_spatial_stage())
    throw CapabilityError("variant " + std::string(to_string(rc.model.variant)) +
                          " has no spatial attention maps");
  const Dataset d = load_dataset(data_path(rc));
  check_geometry(rc.model, d);
  if (opts.image_index >= d.count)
    throw IndexError("image index " + std::to_string(opts.image_index) + " out of range for " +
                     std::to_string(d.count) + " samples");
  const Model<T> model = load_model<T>(rc);
  const std::size_t block = opts.block.value_or(rc.model.depth - 1);
  const std::size_t idx[] = {opts.image_index};
  const Tensor<T> image = d.images<T>(idx);

  const AttnMap map = extract_map(model, image, block, opts.cls_row_only);
  const auto prefix = opts.prefix.empty()
                          ? rc.out / ("attn_" + std::to_string(opts.image_index) + "_b" +
                                      std::to_string(block))
                          : opts.prefix;
  const auto base = prefix.string();
  const auto up = write_pgm(map, base + ".pgm", rc.model.patch_size);
  write_text(base + ".csv", map_csv(map));
  out << "wrote " << base << ".pgm, " << up.string() << ", " << base << ".csv\n";

  const auto cmaps = channel_maps(model, image);
  for (std::size_t b = 0; b < cmaps.size(); ++b) {
    const auto& m = cmaps[b];  // [1,h,T,T]
    const std::size_t heads = m.dim(1), t = m.dim(2);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto path = base + "_channel_b" + std::to_string(b) + "_h" + std::to_string(h) + ".csv";
      write_text(path, matrix_csv(m.data().subspan(h * t * t, t * t), t, t));
      out << "wrote " << path << "\n";
    }
  }
  return 0;
}

}  // namespace

int cmd_gen_data(const RunConfig& rc, std::ostream& out) {
  const Dataset d = gen_synthetic(rc.synthetic_kind, rc.synthetic_count, rc.model.image_size,
                                  rc.train.seed, rc.model.n_classes, rc.model.in_channels);
  const auto path = data_path(rc);
  save_dataset(d, path);
  out << "wrote " << d.count << " " << to_string(rc.synthetic_kind) << " samples ("
      << d.channels << "x" << d.height << "x" << d.width << ", " << d.n_classes
      << " classes) to " << path.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  rc.model.validate();
  auto [tr, va] = load_split(rc);
  check_geometry(rc.model, tr);
  check_geometry(rc.model, va);
  TrainConfig tc = rc.train;
  tc.checkpoint_path = rc.checkpoint_path();
  write_text(rc.out / "config.txt", rc.to_text());
  out << "training " << to_string(rc.model.variant) << " on " << tr.count << " samples, "
      << "validating on " << va.count << "\n";
  const auto result =
      train_with_precision(rc.model, tr, va, tc, [&](const EpochRecord& r) { out << epoch_line(r); });
  write_text(rc.out / "history.csv", history_csv(result.history));
  out << "best val_acc " << result.best_val_acc << " at epoch " << result.best_epoch
      << "; checkpoint " << tc.checkpoint_path.string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  const Dataset d = load_dataset(data_path(rc));
  check_geometry(rc.model, d);
  const double acc = rc.train.precision == Precision::kF64
                         ? evaluate(load_model<double>(rc), d)
                         : evaluate(load_model<float>(rc), d);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", acc);
  out << "accuracy " << buf << " on " << d.count << " samples\n";
  return 0;
}

int cmd_count(const RunConfig& rc, const CountOptions& opts, std::ostream& out) {
  const FlopOptions fo{opts.elementwise};
  const CostReport r = count_flops(rc.model, fo);
  out << to_string(rc.model.variant) << "\n" << format_table(r);
  const auto csv = rc.out / ("cost_" + std::string(to_string(rc.model.variant)) + ".csv");
  write_text(csv, to_csv(r));
  if (opts.compare) {
    ModelConfig base = rc.model;
    base.variant = Variant::kBaselineVit;
    const auto red = relative_reduction(count_flops(base, fo), r);
    char buf[160];
    std::snprintf(buf, sizeof buf, "reduction vs baseline_vit: params %.2f%%, flops %.2f%%\n",
                  100 * red.params, 100 * red.flops);
    out << buf;
  }
  out << "wrote " << csv.string() << "\n";
  return 0;
}

int cmd_gradcheck(const RunConfig& rc, const GradcheckOptions& opts, std::ostream& out) {
  const auto report = model_gradcheck(rc.model, rc.train.seed);
  std::size_t w = 5;
  for (const auto& g : report.groups) w = std::max(w, g.name.size());
  char line[256];
  std::snprintf(line, sizeof line, "%-*s %8s %12s\n", static_cast<int>(w), "group", "scalars",
                "max_rel_err");
  out << line;
  for (const auto& g : report.groups) {
    std::snprintf(line, sizeof line, "%-*s %8zu %12.3e\n", static_cast<int>(w), g.name.c_str(),
                  g.scalars, g.max_error);
    out << line;
  }
  const bool ok = report.max_error() < opts.threshold;
  std::snprintf(line, sizeof line, "max %.3e (threshold %.1e): %s\n", report.max_error(),
                opts.threshold, ok ? "ok" : "FAILED");
  out << line;
  return ok ? 0 : 1;
}

int cmd_attnmap(const RunConfig& rc, const AttnmapOptions& opts, std::ostream& out) {
  return rc.train.precision == Precision::kF64 ? attnmap_as<double>(rc, opts, out)
                                               : attnmap_as<float>(rc, opts, out);
}

int cmd_ablate(const RunConfig& rc, const AblateOptions& opts, std::ostream& out) {
  auto [tr, va] = load_split(rc);
  struct Row {
    ModelConfig cfg;
    TrainResult result;
    std::exception_ptr error;
  };
  std::vector<Row> rows;
  for (Variant v : kAllVariants) {
    Row r;
    r.cfg = rc.model;
    r.cfg.variant = v;
    if (v == Variant::kChannelMhsa) r.cfg.channel_heads = opts.channel_mhsa_heads;
    r.cfg.validate();
    check_geometry(r.cfg, tr);
    rows.push_back(std::move(r));
  }

  auto run = [&](Row& r) {
    try {
      r.result = train_with_precision(r.cfg, tr, va, rc.train, {});
    } catch (...) {
      r.error = std::current_exception();
    }
  };
  if (opts.parallel) {
    std::vector<std::thread> pool;
    for (auto& r : rows) pool.emplace_back(run, std::ref(r));
    for (auto& t : pool) t.join();
  } else {
    for (auto& r : rows) {
      out << "training " << to_string(r.cfg.variant) << "\n";
      run(r);
    }
  }

  std::string csv = "variant,accuracy,params,flops\n";
  for (const auto& r : rows) {
    if (r.error) std::rethrow_exception(r.error);
    const auto cost = count_flops(r.cfg);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%.6f,%llu,%llu\n",
                  std::string(to_string(r.cfg.variant)).c_str(), r.result.best_val_acc,
                  static_cast<unsigned long long>(cost.total_params()),
                  static_cast<unsigned long long>(cost.total_flops()));
    csv += buf;
  }
  const auto path = rc.out / "ablation.csv";
  write_text(path, csv);
  out << csv << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace cavit
