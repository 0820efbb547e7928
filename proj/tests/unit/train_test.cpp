#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "cavit/errors.hpp"
#include "cavit/train.hpp"

using cavit::Dataset;
using cavit::ModelConfig;
using cavit::TrainConfig;
using cavit::Variant;

namespace {

const std::pair<Dataset, Dataset>& bars() {
  static const auto split =
      cavit::split_train_val(cavit::gen_synthetic(cavit::SyntheticKind::kBars, 640, 32, 42), 42);
  return split;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig tc;
  tc.epochs = epochs;
  return tc;
}

}  // namespace

TEST(Train, ZeroLearningRateLeavesParametersUntouched) {
  cavit::Model<float> m(ModelConfig::desk(Variant::kCavit), 1);
  const auto before = cavit::init_params<float>(m.config(), 1);
  auto tc = quick(1);
  tc.learning_rate = 0;
  cavit::train(m, bars().first, bars().second, tc);
  for (std::size_t i = 0; i < before.size(); ++i)
    EXPECT_EQ(m.params().entries()[i].value, before.entries()[i].value);
}

TEST(Train, MemorizesASingleSample) {
  const auto d = cavit::gen_synthetic(cavit::SyntheticKind::kBars, 2, 32, 3);
  const std::size_t first[] = {0};
  const auto one = d.subset(first);
  cavit::Model<float> m(ModelConfig::desk(Variant::kCavit), 2);
  auto tc = quick(200);
  tc.batch_size = 1;
  tc.learning_rate = 0.05;
  const auto r = cavit::train(m, one, one, tc);
  EXPECT_LT(r.history.back().loss, 0.01);
}

TEST(Train, SgdStepMatchesHandSteppedCopy) {
  cavit::Model<double> m(ModelConfig::gradcheck(Variant::kCavit), 3);
  const auto d = cavit::gen_synthetic(cavit::SyntheticKind::kBars, 4, 8, 3);
  const std::size_t idx[] = {0, 1, 2, 3};
  cavit::loss_and_grads(m, d.images<double>(idx), d.labels_of(idx));
  auto expected = m.params();
  for (auto& e : expected.entries())
    for (std::size_t i = 0; i < e.value.numel(); ++i) e.value[i] = e.value[i] - 0.1 * e.grad[i];
  cavit::sgd_step(m.params(), 0.1);
  for (std::size_t i = 0; i < expected.size(); ++i)
    EXPECT_EQ(m.params().entries()[i].value, expected.entries()[i].value);
}

TEST(Train, DeterministicHistory) {
  auto run = [] {
    cavit::Model<float> m(ModelConfig::desk(Variant::kCavit), 42);
    return cavit::train(m, bars().first, bars().second, quick(2)).history;
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, LossDecreasesOverTenEpochsForEveryVariant) {
  for (Variant v : cavit::kAllVariants)
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      cavit::Model<float> m(ModelConfig::desk(v), seed);
      auto tc = quick(10);
      tc.seed = seed;
      const auto h = cavit::train(m, bars().first, bars().second, tc).history;
      EXPECT_LT(h.back().loss, h.front().loss) << to_string(v) << " seed " << seed;
    }
}

TEST(Train, GeometryMismatchIsAConfigError) {
  cavit::Model<float> m(ModelConfig::gradcheck(Variant::kCavit), 1);
  EXPECT_THROW(cavit::train(m, bars().first, bars().second, quick(1)), cavit::ConfigError);
  EXPECT_THROW(cavit::evaluate(m, bars().second), cavit::ConfigError);
  auto tc = quick(1);
  tc.batch_size = 1000;
  cavit::Model<float> desk(ModelConfig::desk(Variant::kCavit), 1);
  EXPECT_THROW(cavit::train(desk, bars().first, bars().second, tc), cavit::ConfigError);
}

TEST(Train, NonFiniteLossAborts) {
  cavit::Model<float> m(ModelConfig::desk(Variant::kCavit), 1);
  m.params().value("head.bias")[0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(cavit::train(m, bars().first, bars().second, quick(1)), cavit::NumericError);
}

TEST(Train, BestCheckpointAndEarlyStop) {
  const auto path = std::filesystem::temp_directory_path() / "cavit_train_best.cavt";
  std::filesystem::remove(path);
  cavit::Model<float> m(ModelConfig::desk(Variant::kBaselineVit), 42);
  auto tc = quick(50);
  tc.checkpoint_path = path;
  tc.stop_train_acc = 0.95;
  tc.stop_val_acc = 0.85;
  const auto r = cavit::train(m, bars().first, bars().second, tc);
  EXPECT_LT(r.history.size(), 50u);
  EXPECT_GE(r.history.back().val_acc, 0.85);
  EXPECT_TRUE(std::filesystem::exists(path));
  std::filesystem::remove(path);
}

TEST(Evaluate, ConstantLogitsTieToClassZero) {
  cavit::Model<float> m(ModelConfig::desk(Variant::kCavit), 1);
  for (auto* n : {"head.weight", "head.bias"})
    for (auto& v : m.params().value(n).data()) v = 0;
  const auto& d = bars().first;
  const auto zeros = std::count(d.labels.begin(), d.labels.end(), 0);
  EXPECT_DOUBLE_EQ(cavit::evaluate(m, d), static_cast<double>(zeros) / static_cast<double>(d.count));
  const float tie[] = {1.0f, 3.0f, 3.0f};
  EXPECT_EQ(cavit::argmax<float>(tie), 1u);
}

TEST(Evaluate, MatchesPerSampleRecount) {
  cavit::Model<float> m(ModelConfig::desk(Variant::kCavit), 5);
  cavit::train(m, bars().first, bars().second, quick(2));
  const auto& d = bars().second;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.count; ++i) {
    const std::size_t idx[] = {i};
    const auto l = m.logits(d.images<float>(idx));
    const std::size_t pred = l[1] > l[0] ? 1 : 0;
    correct += pred == d.labels[i];
  }
  const double recount = static_cast<double>(correct) / static_cast<double>(d.count);
  EXPECT_DOUBLE_EQ(cavit::evaluate(m, d, 7), recount);
  EXPECT_DOUBLE_EQ(cavit::evaluate(m, d), recount);
}

TEST(Evaluate, TrainedModelIsPerfectOnBars) {
  cavit::Model<float> m(ModelConfig::desk(Variant::kBaselineVit), 42);
  cavit::train(m, bars().first, bars().second, quick(4));
  EXPECT_DOUBLE_EQ(cavit::evaluate(m, bars().second), 1.0);
}

TEST(Train, SeedFromEnvironment) {
  ::unsetenv("CAVIT_SEED");
  EXPECT_EQ(cavit::seed_from_env(42), 42u);
  ::setenv("CAVIT_SEED", "7", 1);
  EXPECT_EQ(cavit::seed_from_env(42), 7u);
  ::setenv("CAVIT_SEED", "x7", 1);
  EXPECT_THROW(cavit::seed_from_env(42), cavit::ConfigError);
  ::unsetenv("CAVIT_SEED");
}

TEST(Train, HistoryCsv) {
  const cavit::EpochRecord r[] = {{1, 0.5, 0.25, 1.0}};
  EXPECT_EQ(cavit::history_csv(r), "epoch,loss,train_acc,val_acc\n1,0.5,0.25,1\n");
}
