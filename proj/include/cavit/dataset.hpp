#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "cavit/tensor.hpp"

namespace cavit {

// Layout, little-endian:
//   "CAVD" | version u32 | count u32 | in_channels u32 | H u32 | W u32 | n_classes u32 |
//   count x (label u8 | in_channels*H*W pixels u8, channel-major then row-major)
inline constexpr char kDatasetMagic[] = "CAVD";
inline constexpr std::uint32_t kDatasetVersion = 1;

struct Dataset {
  std::size_t count = 0;
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t n_classes = 2;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> pixels;

  std::size_t sample_size() const noexcept { return channels * height * width; }

  /// Throws ContractError unless the invariants hold.
  void validate() const;

  /// Selected samples as [b,C,H,W] with pixels scaled to [0,1] (x/255).
  template <typename T>
  Tensor<T> images(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> labels_of(std::span<const std::size_t> indices) const;

  Dataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset&) const = default;
};

std::vector<std::uint8_t> encode_dataset(const Dataset& d);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

enum class SyntheticKind { kBars, kBlobs };

SyntheticKind parse_synthetic_kind(std::string_view s);
std::string_view to_string(SyntheticKind k);

/// Labels are assigned round-robin (sample i has class i mod n_classes).
///
/// bars (2 classes): class 0 has horizontal bars, class 1 vertical. Bars are
/// max(1, S/10) pixels wide, so at S=32 the stripe period (6) does not divide
/// an 8-pixel patch and patches differ along the bar axis. A pixel is "on"
/// when (coord / width) is even,
/// coord being the row (horizontal) or column (vertical). Each image draws a
/// contrast a ~ U[0.6, 1] and a background g ~ U[0, 0.2]; a pixel is a or g,
/// plus noise U[-0.1, 0.1], clamped to [0,1].
///
/// blobs (2..4 classes): class q puts a Gaussian bump of sigma S/8 at the
/// centre of quadrant q (column q mod 2, row q / 2), jittered by U[-S/8, S/8]
/// on each axis; pixel = exp(-r^2 / (2 sigma^2)) plus U[-0.1, 0.1] noise, clamped.
///
/// Values are quantized as round(255 v); every channel gets the same plane.
Dataset gen_synthetic(SyntheticKind kind, std::size_t count, std::size_t image_size,
                      std::uint64_t seed, std::size_t n_classes = 2, std::size_t channels = 1);

/// Seeded shuffle, then the last round(val_fraction * count) samples go to validation.
std::pair<Dataset, Dataset> split_train_val(const Dataset& d, std::uint64_t seed,
                                            double val_fraction = 0.2);

extern template Tensor<float> Dataset::images<float>(std::span<const std::size_t>) const;
extern template Tensor<double> Dataset::images<double>(std::span<const std::size_t>) const;

}  // namespace cavit
