#include <gtest/gtest.h>

#include <filesystem>

#include "cavit/attnviz.hpp"
#include "cavit/binary_io.hpp"
#include "cavit/errors.hpp"
#include "support.hpp"

using cavit::ModelConfig;
using cavit::Tensor;
using cavit::Variant;
using cavit::testing::random_tensor;

namespace {

Tensor<double> spatial_map(const cavit::Model<double>& m, const Tensor<double>& img,
                           std::size_t block) {
  cavit::Tape<double> tape;
  auto bound = m.params().bind(tape);
  return m.forward(tape.leaf(img), bound).blocks[block].spatial_map.value();
}

// One block whose attention puts (nearly) all mass on patch `hot` for every
// query: constant query aligned with that token's normalized embedding.
cavit::Model<double> dominant_key_model(std::size_t hot) {
  auto cfg = ModelConfig::desk(Variant::kBaselineVit);
  cfg.depth = 1;
  cfg.spatial_heads = 1;
  cavit::Model<double> m(cfg, 5);
  auto& p = m.params();
  for (auto* n : {"patch_embed.weight", "patch_embed.bias", "blocks.0.attn.w_q",
                  "blocks.0.attn.b_k"})
    for (auto& v : p.value(n).data()) v = 0;
  std::mt19937_64 rng(5);
  p.value("pos_embed") = random_tensor<double>({1, 17, 16}, rng);
  auto& wk = p.value("blocks.0.attn.w_k");
  for (auto& v : wk.data()) v = 0;
  for (std::size_t i = 0; i < 16; ++i) wk.at({i, i}) = 1;
  // b_q = alpha * layernorm(pos[hot + 1])
  const auto& pos = p.value("pos_embed");
  double mean = 0, var = 0;
  for (std::size_t c = 0; c < 16; ++c) mean += pos.at({0, hot + 1, c}) / 16;
  for (std::size_t c = 0; c < 16; ++c)
    var += (pos.at({0, hot + 1, c}) - mean) * (pos.at({0, hot + 1, c}) - mean) / 16;
  for (std::size_t c = 0; c < 16; ++c)
    p.value("blocks.0.attn.b_q")[c] = 50.0 * (pos.at({0, hot + 1, c}) - mean) / std::sqrt(var);
  return m;
}

}  // namespace

TEST(AttnMap, MatchesLoopOracleOnRandomModels) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cavit::Model<double> m(ModelConfig::desk(Variant::kCavit), seed);
    std::mt19937_64 rng(seed);
    for (auto& e : m.params().entries())
      for (auto& v : e.value.data()) v += std::uniform_real_distribution<double>(-1, 1)(rng);
    auto img = random_tensor<double>({1, 1, 32, 32}, rng, 0, 1);
    for (bool cls_only : {false, true}) {
      const auto map = cavit::extract_map(m, img, 1, cls_only);
      const auto ref = cavit::testing::loop_attention_map(spatial_map(m, img, 1), cls_only);
      ASSERT_EQ(map.grid.size(), 16u);
      EXPECT_EQ(map.side, 4u);
      for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(map.grid[i], ref[i], 1e-12);
      EXPECT_EQ(*std::min_element(map.grid.begin(), map.grid.end()), 0.0);
      EXPECT_EQ(*std::max_element(map.grid.begin(), map.grid.end()), 1.0);
    }
  }
}

TEST(AttnMap, DominantKeyGivesOneHotGrid) {
  for (std::size_t hot : {0u, 6u, 15u}) {
    const auto m = dominant_key_model(hot);
    const auto map = cavit::extract_map(m, Tensor<double>({1, 1, 32, 32}), 0);
    for (std::size_t i = 0; i < 16; ++i) {
      if (i == hot)
        EXPECT_EQ(map.grid[i], 1.0);
      else
        EXPECT_LT(map.grid[i], 1e-6) << "cell " << i;
    }
  }
}

TEST(AttnMap, UniformAttentionExportsHalf) {
  const auto map = cavit::reduce_attention(Tensor<double>::full({1, 2, 5, 5}, 0.2), 0);
  for (double v : map.grid) EXPECT_EQ(v, 0.5);
}

TEST(AttnMap, HeadOrderDoesNotMatter) {
  std::mt19937_64 rng(3);
  auto attn = random_tensor<double>({1, 3, 10, 10}, rng, 0, 1);
  auto swapped = attn;
  for (std::size_t i = 0; i < 100; ++i) std::swap(swapped[i], swapped[200 + i]);
  const auto a = cavit::reduce_attention(attn, 0), b = cavit::reduce_attention(swapped, 0);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(a.grid[i], b.grid[i], 1e-14);
}

TEST(AttnMap, PureFunctionOfWeightsAndImage) {
  cavit::Model<float> m(ModelConfig::desk(Variant::kClsSwapped), 4);
  std::mt19937_64 rng(4);
  auto img = random_tensor<float>({1, 1, 32, 32}, rng, 0, 1);
  EXPECT_EQ(cavit::extract_map(m, img, 0).grid, cavit::extract_map(m, img, 0).grid);
}

TEST(AttnMap, Contracts) {
  cavit::Model<float> m(ModelConfig::desk(Variant::kCavit), 1);
  Tensor<float> img({1, 1, 32, 32});
  EXPECT_THROW(cavit::extract_map(m, img, 2), cavit::IndexError);
  EXPECT_THROW(cavit::extract_map(m, Tensor<float>({2, 1, 32, 32}), 0), cavit::DimensionError);
  cavit::Model<float> only(ModelConfig::desk(Variant::kChannelOnly), 1);
  EXPECT_THROW(cavit::extract_map(only, img, 0), cavit::CapabilityError);
  EXPECT_EQ(cavit::channel_maps(only, img).size(), 2u);
}

TEST(Pgm, DirectEncoding) {
  const double grid[] = {0, 1, 1, 0};
  const auto bytes = cavit::encode_pgm(grid, 2, 2);
  const std::string header = "P5\n2 2\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + header.size()), header);
  EXPECT_EQ(std::vector<std::uint8_t>(bytes.end() - 4, bytes.end()),
            (std::vector<std::uint8_t>{0, 255, 255, 0}));
  const auto back = cavit::decode_pgm(bytes);
  EXPECT_EQ(back.width, 2u);
  EXPECT_EQ(back.height, 2u);
  EXPECT_EQ(back.maxval, 255u);
}

TEST(Pgm, UpscaledImageCoversTheInput) {
  cavit::AttnMap map;
  map.side = 4;
  for (std::size_t i = 0; i < 16; ++i) map.grid.push_back(i / 15.0);
  const auto path = std::filesystem::temp_directory_path() / "cavit_attn_test.pgm";
  const auto up = cavit::write_pgm(map, path, 8);
  EXPECT_EQ(up.filename(), "cavit_attn_test_x8.pgm");
  const auto big = cavit::decode_pgm(cavit::read_file(up));
  EXPECT_EQ(big.width, 32u);
  EXPECT_EQ(big.height, 32u);
  EXPECT_EQ(big.pixels[31], 255 * 3 / 15);  // row 0, last cell: grid value 3/15
  EXPECT_EQ(cavit::decode_pgm(cavit::read_file(path)).width, 4u);
  std::filesystem::remove(path);
  std::filesystem::remove(up);
}

TEST(Csv, MapRows) {
  cavit::AttnMap map;
  map.side = 2;
  map.grid = {0, 0.5, 1, 0.25};
  EXPECT_EQ(cavit::map_csv(map), "0,0.5\n1,0.25\n");
}
