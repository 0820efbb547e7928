#include "cavit/attnviz.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "cavit/binary_io.hpp"

namespace cavit {

template <typename T>
AttnMap reduce_attention(const Tensor<T>& attn, std::size_t block, bool cls_row_only) {
  if (attn.rank() != 4 || attn.dim(0) != 1 || attn.dim(2) != attn.dim(3))
    throw DimensionError("expected one [1,H,T,T] attention tensor, got " +
                         shape_str(attn.dims()));
  const std::size_t H = attn.dim(1), Tn = attn.dim(2), N = Tn - 1;
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(N))));
  if (side * side != N)
    throw DimensionError(std::to_string(N) + " patch tokens do not form a square grid");

  AttnMap m;
  m.side = side;
  m.block = block;
  m.cls_row_only = cls_row_only;
  m.grid.assign(N, 0.0);
  const std::size_t rows = cls_row_only ? 1 : Tn;
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t q = 0; q < rows; ++q) {
      const T* row = attn.data().data() + (h * Tn + q) * Tn;
      for (std::size_t k = 1; k < Tn; ++k) m.grid[k - 1] += static_cast<double>(row[k]);
    }
  const double denom = static_cast<double>(H * rows);
  for (auto& v : m.grid) v /= denom;

  const auto [lo, hi] = std::minmax_element(m.grid.begin(), m.grid.end());
  const double min = *lo, range = *hi - *lo;
  for (auto& v : m.grid) v = range > 0 ? (v - min) / range : 0.5;
  return m;
}

template <typename T>
AttnMap extract_map(const Model<T>& model, const Tensor<T>& image, std::size_t block,
                    bool cls_row_only) {
  const auto& cfg = model.config();
  if (block >= cfg.depth)
    throw IndexError("block " + std::to_string(block) + " out of range for depth " +
                     std::to_string(cfg.depth));
  if (!cfg.has_spatial_stage())
    throw CapabilityError("variant " + std::string(to_string(cfg.variant)) +
                          " has no spatial attention maps");
  if (image.rank() != 4 || image.dim(0) != 1)
    throw DimensionError("extract_map takes one image [1,C,W,W], got " + shape_str(image.dims()));
  Tape<T> tape;
  auto bound = model.params().bind(tape);
  auto fwd = model.forward(tape.leaf(image), bound);
  return reduce_attention(fwd.blocks[block].spatial_map.value(), block, cls_row_only);
}

template <typename T>
std::vector<Tensor<T>> channel_maps(const Model<T>& model, const Tensor<T>& image) {
  Tape<T> tape;
  auto bound = model.params().bind(tape);
  auto fwd = model.forward(tape.leaf(image), bound);
  std::vector<Tensor<T>> out;
  for (const auto& b : fwd.blocks)
    if (b.channel_map.valid()) out.push_back(b.channel_map.value());
  return out;
}

std::vector<std::uint8_t> encode_pgm(std::span<const double> values, std::size_t width,
                                     std::size_t height) {
  if (values.size() != width * height)
    throw DimensionError("pgm needs " + std::to_string(width * height) + " values, got " +
                         std::to_string(values.size()));
  ByteWriter w;
  w.bytes("P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n");
  for (double v : values)
    w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return w.take();
}

Pgm decode_pgm(std::span<const std::uint8_t> bytes) {
  using K = FormatError::Kind;
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    const std::size_t begin = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
    if (begin == pos) throw FormatError(K::kTruncated, pos, "truncated pgm header");
    return std::string(bytes.begin() + static_cast<std::ptrdiff_t>(begin),
                       bytes.begin() + static_cast<std::ptrdiff_t>(pos));
  };
  if (token() != "P5") throw FormatError(K::kBadMagic, 0, "bad pgm magic: expected \"P5\"");
  Pgm p;
  try {
    p.width = std::stoul(token());
    p.height = std::stoul(token());
    p.maxval = std::stoul(token());
  } catch (const std::logic_error&) {
    throw FormatError(K::kInvalidValue, pos, "malformed pgm header");
  }
  ++pos;  // single whitespace byte ends the header
  if (bytes.size() < pos + p.width * p.height)
    throw FormatError(K::kTruncated, pos, "truncated pgm pixel data");
  p.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + p.width * p.height));
  return p;
}

std::filesystem::path write_pgm(const AttnMap& map, const std::filesystem::path& path,
                                std::size_t upscale) {
  if (upscale == 0) throw ContractError("upscale factor must be positive");
  write_file(path, encode_pgm(map.grid, map.side, map.side));
  const std::size_t big = map.side * upscale;
  std::vector<double> up(big * big);
  for (std::size_t y = 0; y < big; ++y)
    for (std::size_t x = 0; x < big; ++x) up[y * big + x] = map.at(y / upscale, x / upscale);
  auto up_path = path;
  up_path.replace_filename(path.stem().string() + "_x" + std::to_string(upscale) +
                           path.extension().string());
  write_file(up_path, encode_pgm(up, big, big));
  return up_path;
}

std::string map_csv(const AttnMap& map) {
  return matrix_csv<double>(map.grid, map.side, map.side);
}

template <typename T>
std::string matrix_csv(std::span<const T> values, std::size_t rows, std::size_t cols) {
  std::string out;
  char cell[48];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::snprintf(cell, sizeof cell, "%s%.9g", c ? "," : "",
                    static_cast<double>(values[r * cols + c]));
      out += cell;
    }
    out += "\n";
  }
  return out;
}

template AttnMap reduce_attention(const Tensor<float>&, std::size_t, bool);
template AttnMap reduce_attention(const Tensor<double>&, std::size_t, bool);
template AttnMap extract_map(const Model<float>&, const Tensor<float>&, std::size_t, bool);
template AttnMap extract_map(const Model<double>&, const Tensor<double>&, std::size_t, bool);
template std::vector<Tensor<float>> channel_maps(const Model<float>&, const Tensor<float>&);
template std::vector<Tensor<double>> channel_maps(const Model<double>&, const Tensor<double>&);
template std::string matrix_csv(std::span<const float>, std::size_t, std::size_t);
template std::string matrix_csv(std::span<const double>, std::size_t, std::size_t);

}  // namespace cavit
