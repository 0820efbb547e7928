#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cavit/params.hpp"

namespace cavit {

// Layout, little-endian throughout:
//   "CAVT" | version u32 | tensor count u32 |
//   per tensor: name length u32 | name bytes | rank u32 | dims u32 x rank | f32 data
inline constexpr char kCheckpointMagic[] = "CAVT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
  bool operator==(const NamedTensor&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Parameters are narrowed to 32-bit on disk.
template <typename T>
std::vector<NamedTensor> snapshot(const ParamStore<T>& store);

template <typename T>
void save_checkpoint(const ParamStore<T>& store, const std::filesystem::path& path);

/// Overwrites every parameter of `store` from the file. The file must hold
/// exactly the store's names with matching shapes.
template <typename T>
void load_checkpoint(ParamStore<T>& store, const std::filesystem::path& path);

template <typename T>
void restore(ParamStore<T>& store, std::span<const NamedTensor> tensors);

}  // namespace cavit
