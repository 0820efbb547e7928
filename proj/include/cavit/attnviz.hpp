#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cavit/model.hpp"

namespace cavit {

/// Spatial attention averaged over heads and query rows, laid out on the
/// patch grid and min-max normalized to [0,1]. A constant map becomes all 0.5.
struct AttnMap {
  std::size_t side = 0;
  std::vector<double> grid;  // side x side, patch scan order
  std::size_t block = 0;
  bool head_averaged = true;
  bool cls_row_only = false;

  double at(std::size_t row, std::size_t col) const { return grid[row * side + col]; }
};

/// Reduces one [1,H,N+1,N+1] spatial attention tensor. Averages over heads
/// and every query row (or only the CLS row), then drops the CLS key column.
template <typename T>
AttnMap reduce_attention(const Tensor<T>& attn, std::size_t block, bool cls_row_only = false);

/// Runs the model on one image [1,C,W,W] and reduces block `block`'s spatial map.
template <typename T>
AttnMap extract_map(const Model<T>& model, const Tensor<T>& image, std::size_t block,
                    bool cls_row_only = false);

/// Raw [1,h,T,T] channel-stage maps of every block, for inspection.
template <typename T>
std::vector<Tensor<T>> channel_maps(const Model<T>& model, const Tensor<T>& image);

struct Pgm {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t maxval = 255;
  std::vector<std::uint8_t> pixels;
};

/// Binary "P5" image with maxval 255; values are round(v * 255).
std::vector<std::uint8_t> encode_pgm(std::span<const double> values, std::size_t width,
                                     std::size_t height);
Pgm decode_pgm(std::span<const std::uint8_t> bytes);

/// Writes `path` at grid resolution and `<stem>_x<upscale><ext>` with each
/// cell repeated upscale x upscale times. Returns the upscaled path.
std::filesystem::path write_pgm(const AttnMap& map, const std::filesystem::path& path,
                                std::size_t upscale);

/// Rows of the grid as comma-separated values.
std::string map_csv(const AttnMap& map);
/// Rows of a [T,T] slice as comma-separated values.
template <typename T>
std::string matrix_csv(std::span<const T> values, std::size_t rows, std::size_t cols);

}  // namespace cavit
