#include <gtest/gtest.h>

#include "cavit/cost_model.hpp"
#include "cavit/model.hpp"

using cavit::ModelConfig;
using cavit::Variant;

namespace {

std::vector<ModelConfig> sizes(Variant v) {
  auto mid = ModelConfig::desk(v);
  mid.image_size = 48;
  mid.patch_size = 12;
  mid.embed_dim = 24;
  mid.spatial_heads = 3;
  mid.channel_heads = v == Variant::kChannelMhsa ? 2 : 1;
  mid.mlp_ratio = 2.5;
  mid.n_classes = 5;
  mid.in_channels = 3;
  mid.cls_projection = cavit::ClsProjection::kLearnedLinear;
  auto desk = ModelConfig::desk(v);
  if (v == Variant::kChannelMhsa) desk.channel_heads = 2;
  return {ModelConfig::gradcheck(v), desk, mid};
}

}  // namespace

TEST(CostModel, ParamCountMatchesInstantiatedStore) {
  for (Variant v : cavit::kAllVariants)
    for (const auto& cfg : sizes(v))
      EXPECT_EQ(cavit::count_params(cfg).total_params(),
                cavit::init_params<float>(cfg, 1).scalar_count())
          << to_string(v) << " C=" << cfg.embed_dim;
}

TEST(CostModel, FlopCountMatchesInstrumentedForward) {
  for (Variant v : cavit::kAllVariants)
    for (const auto& cfg : sizes(v)) {
      cavit::Model<float> m(cfg, 1);
      cavit::Tensor<float> img({1, cfg.in_channels, cfg.image_size, cfg.image_size});
      cavit::FlopCounter counter;
      m.logits(img);
      EXPECT_EQ(counter.matmul_flops(), cavit::count_flops(cfg).total_flops())
          << to_string(v) << " C=" << cfg.embed_dim;
    }
}

TEST(CostModel, PaperScaleBaselineIsNearPublishedTotal) {
  const auto r = cavit::count_params(ModelConfig::paper_scale(Variant::kBaselineVit));
  EXPECT_NEAR(static_cast<double>(r.total_params()), 5.7e6, 0.05 * 5.7e6);
}

TEST(CostModel, BlockCostIsTheDepthIncrement) {
  for (Variant v : cavit::kAllVariants) {
    auto cfg = ModelConfig::desk(v);
    auto deeper = cfg;
    deeper.depth += 1;
    const auto b = cavit::block_cost(cfg);
    EXPECT_EQ(cavit::count_params(deeper).total_params() - cavit::count_params(cfg).total_params(),
              b.params);
    EXPECT_EQ(cavit::count_flops(deeper).total_flops() - cavit::count_flops(cfg).total_flops(),
              b.flops);
  }
}

TEST(CostModel, ReductionAndElementwiseFlag) {
  const auto base = cavit::count_flops(ModelConfig::desk(Variant::kBaselineVit));
  const auto red = cavit::relative_reduction(base, base);
  EXPECT_EQ(red.params, 0.0);
  EXPECT_EQ(red.flops, 0.0);
  const auto with = cavit::count_flops(ModelConfig::desk(Variant::kCavit), {true});
  const auto without = cavit::count_flops(ModelConfig::desk(Variant::kCavit));
  EXPECT_GT(with.total_flops(), without.total_flops());
  EXPECT_EQ(with.total_params(), without.total_params());
}

TEST(CostModel, CsvHasHeaderAndTotal) {
  const auto r = cavit::count_flops(ModelConfig::gradcheck(Variant::kCavit));
  const auto csv = cavit::to_csv(r);
  EXPECT_EQ(csv.rfind("sublayer,params,flops\n", 0), 0u);
  EXPECT_NE(csv.find("total," + std::to_string(r.total_params()) + "," +
                     std::to_string(r.total_flops()) + "\n"),
            std::string::npos);
  EXPECT_NE(cavit::format_table(r).find("blocks.0.chan_attn"), std::string::npos);
}
