#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cavit/dataset.hpp"
#include "cavit/model.hpp"

namespace cavit {

enum class Precision { kF32, kF64 };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view s);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 200;
  std::size_t batch_size = 8;
  std::uint64_t seed = 42;
  Precision precision = Precision::kF32;
  /// Best-validation-accuracy checkpoint; empty disables it.
  std::filesystem::path checkpoint_path;
  /// Stop early once both accuracies reach these values (disabled when unset).
  std::optional<double> stop_train_acc;
  std::optional<double> stop_val_acc;

  void validate(std::size_t train_count) const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0;        // sample-weighted mean training loss
  double train_acc = 0;
  double val_acc = 0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_val_acc = -1;
  std::size_t best_epoch = 0;
};

/// Reads CAVIT_SEED when set, otherwise returns `fallback`.
std::uint64_t seed_from_env(std::uint64_t fallback);

/// ConfigError unless the dataset's geometry and classes fit the model.
void check_geometry(const ModelConfig& cfg, const Dataset& d);

/// p <- p - lr * grad(p) for every parameter.
template <typename T>
void sgd_step(ParamStore<T>& params, double lr);

/// Mean cross-entropy of one batch; leaves the gradients in params' grad slots.
template <typename T>
double loss_and_grads(Model<T>& model, const Tensor<T>& images,
                      std::span<const std::size_t> labels);

/// Index of the largest value; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> row);

/// Top-1 accuracy in [0,1].
template <typename T>
double evaluate(const Model<T>& model, const Dataset& d, std::size_t batch_size = 64);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Plain SGD on mean cross-entropy with a seeded per-epoch shuffle.
template <typename T>
TrainResult train(Model<T>& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& tc, const EpochCallback& on_epoch = {});

/// "epoch,loss,train_acc,val_acc" with 9 significant digits.
std::string history_csv(std::span<const EpochRecord> history);

extern template double evaluate(const Model<float>&, const Dataset&, std::size_t);
extern template double evaluate(const Model<double>&, const Dataset&, std::size_t);

}  // namespace cavit
