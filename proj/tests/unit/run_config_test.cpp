#include <gtest/gtest.h>

#include "cavit/errors.hpp"
#include "cavit/run_config.hpp"

using cavit::RunConfig;
using cavit::Source;

TEST(RunConfig, DefaultsCarryDefaultProvenance) {
  RunConfig rc;
  for (const auto& k : RunConfig::keys()) EXPECT_EQ(rc.source_of(k), Source::kDefault) << k;
  EXPECT_EQ(rc.checkpoint_path(), std::filesystem::path("out") / "best.cavt");
}

TEST(RunConfig, FileThenOverrideLastWins) {
  RunConfig rc;
  rc.apply_text("# comment\nvariant = channel_only\n\nembed_dim = 8  # inline\nseed=3\n", "a.cfg",
                Source::kFile);
  rc.apply_override("seed=9");
  EXPECT_EQ(rc.model.variant, cavit::Variant::kChannelOnly);
  EXPECT_EQ(rc.model.embed_dim, 8u);
  EXPECT_EQ(rc.train.seed, 9u);
  EXPECT_EQ(rc.source_of("variant"), Source::kFile);
  EXPECT_EQ(rc.source_of("seed"), Source::kFlag);
  EXPECT_EQ(rc.source_of("depth"), Source::kDefault);
}

TEST(RunConfig, UnknownKeyNamesOriginAndLine) {
  RunConfig rc;
  try {
    rc.apply_text("depth = 2\nfoo = 1\n", "bad.cfg", Source::kFile);
    FAIL();
  } catch (const cavit::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.cfg:2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("foo"), std::string::npos);
  }
}

TEST(RunConfig, BadValuesAreRejected) {
  RunConfig rc;
  EXPECT_THROW(rc.set("depth", "two", Source::kFlag), cavit::ConfigError);
  EXPECT_THROW(rc.set("learning_rate", "0.1x", Source::kFlag), cavit::ConfigError);
  EXPECT_THROW(rc.set("variant", "resnet", Source::kFlag), cavit::ConfigError);
  EXPECT_THROW(rc.apply_override("depth"), cavit::ConfigError);
  EXPECT_THROW(rc.apply_text("depth 2\n", "x", Source::kFile), cavit::ConfigError);
}

TEST(RunConfig, PrintedTextReparsesToTheSameValues) {
  RunConfig rc;
  rc.apply_text(
      "variant = cls_swapped\nlearning_rate = 0.0003\nstop_val_acc = 0.85\n"
      "val_data = v.cavd\ncls_projection = learned_linear\nsynthetic_kind = blobs\n",
      "f", Source::kFile);
  RunConfig back;
  back.apply_text(rc.to_text(), "printed", Source::kFile);
  for (const auto& k : RunConfig::keys()) EXPECT_EQ(back.get(k), rc.get(k)) << k;
  EXPECT_EQ(back.train.learning_rate, 0.0003);
  EXPECT_EQ(back.to_text().find("# default") != std::string::npos, false);
  EXPECT_NE(rc.to_text().find("# default"), std::string::npos);
}

TEST(RunConfig, EmptyValueClearsOptionals) {
  RunConfig rc;
  rc.set("stop_val_acc", "0.5", Source::kFlag);
  rc.set("stop_val_acc", "", Source::kFlag);
  EXPECT_FALSE(rc.train.stop_val_acc.has_value());
  EXPECT_EQ(rc.get("stop_val_acc"), "");
}
