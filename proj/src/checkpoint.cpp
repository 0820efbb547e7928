#include "cavit/checkpoint.hpp"

#include "cavit/binary_io.hpp"

namespace cavit {

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors) {
  ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.dims()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.value.data()) w.f32(v);
  }
  return w.take();
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.bytes(4, "magic");
  if (magic != std::string_view(kCheckpointMagic, 4))
    throw FormatError(FormatError::Kind::kBadMagic, 0,
                      "bad checkpoint magic: expected \"CAVT\", got \"" + magic + "\"");
  const std::size_t vpos = r.offset();
  const auto version = r.u32("version");
  if (version != kCheckpointVersion)
    throw FormatError(FormatError::Kind::kBadVersion, vpos,
                      "unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  const auto count = r.u32("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.u32("name length");
    auto name = r.bytes(name_len, "tensor name");
    const std::size_t rpos = r.offset();
    const auto rank = r.u32("rank");
    if (rank == 0 || rank > kMaxRank)
      throw FormatError(FormatError::Kind::kInvalidValue, rpos,
                        "tensor '" + name + "' has invalid rank " + std::to_string(rank));
    Shape dims(rank);
    std::size_t numel = 1;
    for (auto& d : dims) {
      const std::size_t dpos = r.offset();
      d = r.u32("dimension");
      if (d == 0)
        throw FormatError(FormatError::Kind::kInvalidValue, dpos,
                          "tensor '" + name + "' has a zero extent");
      numel *= d;
    }
    if (numel > r.remaining() / 4)
      throw FormatError(FormatError::Kind::kTruncated, r.offset(),
                        "truncated file: tensor '" + name + "' needs " +
                            std::to_string(numel * 4) + " bytes, " +
                            std::to_string(r.remaining()) + " left");
    std::vector<float> data(numel);
    for (auto& v : data) v = r.f32("tensor data");
    out.push_back({std::move(name), Tensor<float>(std::move(dims), std::move(data))});
  }
  if (r.remaining() != 0)
    throw FormatError(FormatError::Kind::kInvalidValue, r.offset(),
                      std::to_string(r.remaining()) + " trailing byte(s) after last tensor");
  return out;
}

template <typename T>
std::vector<NamedTensor> snapshot(const ParamStore<T>& store) {
  std::vector<NamedTensor> out;
  for (const auto& e : store.entries()) out.push_back({e.name, e.value.template cast<float>()});
  return out;
}

template <typename T>
void restore(ParamStore<T>& store, std::span<const NamedTensor> tensors) {
  for (const auto& t : tensors) {
    if (!store.contains(t.name))
      throw FormatError(FormatError::Kind::kMissingTensor, 0,
                        "checkpoint tensor '" + t.name + "' does not exist in the model");
    const auto& want = store.value(t.name).dims();
    if (want != t.value.dims())
      throw FormatError(FormatError::Kind::kShapeMismatch, 0,
                        "tensor '" + t.name + "' has shape " + shape_str(t.value.dims()) +
                            " in the checkpoint but " + shape_str(want) + " in the model");
  }
  for (const auto& e : store.entries()) {
    bool found = false;
    for (const auto& t : tensors) found = found || t.name == e.name;
    if (!found)
      throw FormatError(FormatError::Kind::kMissingTensor, 0,
                        "model parameter '" + e.name + "' is missing from the checkpoint");
  }
  if (tensors.size() != store.size())
    throw FormatError(FormatError::Kind::kInvalidValue, 0, "checkpoint repeats a tensor name");
  for (const auto& t : tensors) store.value(t.name) = t.value.template cast<T>();
}

template <typename T>
void save_checkpoint(const ParamStore<T>& store, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(snapshot(store)));
}

template <typename T>
void load_checkpoint(ParamStore<T>& store, const std::filesystem::path& path) {
  const auto tensors = decode_checkpoint(read_file(path));
  restore(store, tensors);
}

template std::vector<NamedTensor> snapshot(const ParamStore<float>&);
template std::vector<NamedTensor> snapshot(const ParamStore<double>&);
template void restore(ParamStore<float>&, std::span<const NamedTensor>);
template void restore(ParamStore<double>&, std::span<const NamedTensor>);
template void save_checkpoint(const ParamStore<float>&, const std::filesystem::path&);
template void save_checkpoint(const ParamStore<double>&, const std::filesystem::path&);
template void load_checkpoint(ParamStore<float>&, const std::filesystem::path&);
template void load_checkpoint(ParamStore<double>&, const std::filesystem::path&);

}  // namespace cavit
