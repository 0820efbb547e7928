#include "cavit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <random>

#include "cavit/checkpoint.hpp"

namespace cavit {

std::string_view to_string(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view s) {
  if (s == "f32" || s == "float32") return Precision::kF32;
  if (s == "f64" || s == "float64") return Precision::kF64;
  throw ConfigError("unknown precision '" + std::string(s) + "' (expected f32 or f64)");
}

void TrainConfig::validate(std::size_t train_count) const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be finite and non-negative");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (batch_size > train_count)
    throw ConfigError("batch_size " + std::to_string(batch_size) + " exceeds the " +
                      std::to_string(train_count) + " training samples");
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* v = std::getenv("CAVIT_SEED");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0') throw ConfigError("CAVIT_SEED is not an unsigned integer: '" + std::string(v) + "'");
  return s;
}

void check_geometry(const ModelConfig& cfg, const Dataset& d) {
  d.validate();
  if (d.channels != cfg.in_channels || d.height != cfg.image_size || d.width != cfg.image_size)
    throw ConfigError("dataset images are " + std::to_string(d.channels) + "x" +
                      std::to_string(d.height) + "x" + std::to_string(d.width) +
                      " but the model expects " + std::to_string(cfg.in_channels) + "x" +
                      std::to_string(cfg.image_size) + "x" + std::to_string(cfg.image_size));
  if (d.n_classes != cfg.n_classes)
    throw ConfigError("dataset has " + std::to_string(d.n_classes) + " classes, model has " +
                      std::to_string(cfg.n_classes));
}

template <typename T>
void sgd_step(ParamStore<T>& params, double lr) {
  const T step = static_cast<T>(lr);
  for (auto& e : params.entries()) {
    auto v = e.value.data();
    auto g = e.grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= step * g[i];
  }
}

template <typename T>
double loss_and_grads(Model<T>& model, const Tensor<T>& images,
                      std::span<const std::size_t> labels) {
  Tape<T> tape;
  auto bound = model.params().bind(tape);
  auto fwd = model.forward(tape.leaf(images), bound);
  auto loss = cross_entropy(fwd.logits, labels);
  tape.backward(loss);
  model.params().collect_grads(tape, bound);
  return static_cast<double>(loss.value()[0]);
}

template <typename T>
std::size_t argmax(std::span<const T> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

template <typename T>
double evaluate(const Model<T>& model, const Dataset& d, std::size_t batch_size) {
  check_geometry(model.config(), d);
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < d.count; start += batch_size) {
    idx.resize(std::min(batch_size, d.count - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto logits = model.logits(d.images<T>(idx));
    const std::size_t K = logits.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b)
      if (argmax(logits.data().subspan(b * K, K)) == d.labels[idx[b]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(d.count);
}

template <typename T>
TrainResult train(Model<T>& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& tc, const EpochCallback& on_epoch) {
  check_geometry(model.config(), train_set);
  check_geometry(model.config(), val_set);
  tc.validate(train_set.count);

  std::mt19937_64 rng(tc.seed);
  std::vector<std::size_t> order(train_set.count);
  std::iota(order.begin(), order.end(), 0);
  TrainResult result;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::span<const std::size_t> batch =
          std::span<const std::size_t>(order).subspan(start,
                                                      std::min(tc.batch_size, order.size() - start));
      const auto labels = train_set.labels_of(batch);
      const double loss = loss_and_grads(model, train_set.images<T>(batch), labels);
      if (!std::isfinite(loss))
        throw NumericError("non-finite training loss " + std::to_string(loss) + " at epoch " +
                           std::to_string(epoch) + ", batch starting at sample " +
                           std::to_string(start));
      loss_sum += loss * static_cast<double>(batch.size());
      sgd_step(model.params(), tc.learning_rate);
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()),
                    evaluate(model, train_set), evaluate(model, val_set)};
    result.history.push_back(rec);
    if (rec.val_acc > result.best_val_acc) {
      result.best_val_acc = rec.val_acc;
      result.best_epoch = epoch;
      if (!tc.checkpoint_path.empty()) save_checkpoint(model.params(), tc.checkpoint_path);
    }
    if (on_epoch) on_epoch(rec);
    if (tc.stop_train_acc && tc.stop_val_acc && rec.train_acc >= *tc.stop_train_acc &&
        rec.val_acc >= *tc.stop_val_acc)
      break;
  }
  return result;
}

std::string history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,loss,train_acc,val_acc\n";
  char line[128];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g\n", r.epoch, r.loss, r.train_acc,
                  r.val_acc);
    out += line;
  }
  return out;
}

#define CAVIT_INSTANTIATE_TRAIN(T)                                                         \
  template void sgd_step(ParamStore<T>&, double);                                          \
  template double loss_and_grads(Model<T>&, const Tensor<T>&, std::span<const std::size_t>); \
  template std::size_t argmax(std::span<const T>);                                         \
  template double evaluate(const Model<T>&, const Dataset&, std::size_t);                  \
  template TrainResult train(Model<T>&, const Dataset&, const Dataset&, const TrainConfig&, \
                             const EpochCallback&);

CAVIT_INSTANTIATE_TRAIN(float)
CAVIT_INSTANTIATE_TRAIN(double)

#undef CAVIT_INSTANTIATE_TRAIN

}  // namespace cavit
