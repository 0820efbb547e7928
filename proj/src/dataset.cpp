#include "cavit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cavit/binary_io.hpp"

namespace cavit {

void Dataset::validate() const {
  if (count == 0) throw ContractError("dataset is empty");
  if (channels == 0 || height == 0 || width == 0)
    throw ContractError("dataset image extents must be positive");
  if (n_classes == 0 || n_classes > 256) throw ContractError("n_classes must be in 1..256");
  if (labels.size() != count || pixels.size() != count * sample_size())
    throw ContractError("dataset buffers do not match its header");
  for (std::size_t i = 0; i < count; ++i)
    if (labels[i] >= n_classes)
      throw ContractError("sample " + std::to_string(i) + " has label " +
                          std::to_string(labels[i]) + " >= n_classes " +
                          std::to_string(n_classes));
}

template <typename T>
Tensor<T> Dataset::images(std::span<const std::size_t> indices) const {
  const std::size_t n = sample_size();
  Tensor<T> out({indices.size(), channels, height, width});
  auto dst = out.data();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= count) throw IndexError("sample index out of range");
    const std::uint8_t* src = pixels.data() + indices[b] * n;
    for (std::size_t i = 0; i < n; ++i) dst[b * n + i] = static_cast<T>(src[i]) / T(255);
  }
  return out;
}

std::vector<std::size_t> Dataset::labels_of(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset d = *this;
  d.count = indices.size();
  d.labels.clear();
  d.pixels.clear();
  const std::size_t n = sample_size();
  for (auto i : indices) {
    d.labels.push_back(labels.at(i));
    d.pixels.insert(d.pixels.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i * n),
                    pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
  }
  return d;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& d) {
  d.validate();
  ByteWriter w;
  w.bytes(std::string_view(kDatasetMagic, 4));
  w.u32(kDatasetVersion);
  for (auto v : {d.count, d.channels, d.height, d.width, d.n_classes})
    w.u32(static_cast<std::uint32_t>(v));
  const std::size_t n = d.sample_size();
  for (std::size_t i = 0; i < d.count; ++i) {
    w.u8(d.labels[i]);
    for (std::size_t j = 0; j < n; ++j) w.u8(d.pixels[i * n + j]);
  }
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  using K = FormatError::Kind;
  ByteReader r(bytes);
  const auto magic = r.bytes(4, "magic");
  if (magic != std::string_view(kDatasetMagic, 4))
    throw FormatError(K::kBadMagic, 0,
                      "bad dataset magic: expected \"CAVD\", got \"" + magic + "\"");
  const std::size_t vpos = r.offset();
  const auto version = r.u32("version");
  if (version != kDatasetVersion)
    throw FormatError(K::kBadVersion, vpos,
                      "unsupported dataset version " + std::to_string(version) + " (expected " +
                          std::to_string(kDatasetVersion) + ")");
  Dataset d;
  const char* fields[] = {"count", "in_channels", "H", "W", "n_classes"};
  std::size_t* slots[] = {&d.count, &d.channels, &d.height, &d.width, &d.n_classes};
  for (int i = 0; i < 5; ++i) {
    const std::size_t pos = r.offset();
    *slots[i] = r.u32(fields[i]);
    if (*slots[i] == 0)
      throw FormatError(K::kInvalidValue, pos, std::string(fields[i]) + " must be positive");
  }
  if (d.n_classes > 256)
    throw FormatError(K::kInvalidValue, 24, "n_classes " + std::to_string(d.n_classes) +
                                                " does not fit u8 labels");
  const std::size_t n = d.sample_size();
  if (d.count > r.remaining() / (n + 1))
    throw FormatError(K::kTruncated, r.offset(),
                      "truncated file: " + std::to_string(d.count) + " samples need " +
                          std::to_string(d.count * (n + 1)) + " bytes, " +
                          std::to_string(r.remaining()) + " left");
  d.labels.resize(d.count);
  d.pixels.resize(d.count * n);
  for (std::size_t i = 0; i < d.count; ++i) {
    const std::size_t pos = r.offset();
    d.labels[i] = r.u8("label");
    if (d.labels[i] >= d.n_classes)
      throw FormatError(K::kInvalidValue, pos,
                        "label " + std::to_string(d.labels[i]) + " of sample " +
                            std::to_string(i) + " is out of range for " +
                            std::to_string(d.n_classes) + " classes");
    const auto px = r.bytes(n, "pixels");
    std::copy(px.begin(), px.end(), d.pixels.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  if (r.remaining() != 0)
    throw FormatError(K::kInvalidValue, r.offset(),
                      std::to_string(r.remaining()) + " trailing byte(s) after last sample");
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  write_file(path, encode_dataset(d));
}

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

std::string_view to_string(SyntheticKind k) {
  return k == SyntheticKind::kBars ? "bars" : "blobs";
}

SyntheticKind parse_synthetic_kind(std::string_view s) {
  if (s == "bars") return SyntheticKind::kBars;
  if (s == "blobs") return SyntheticKind::kBlobs;
  throw ConfigError("unknown synthetic kind '" + std::string(s) + "' (expected bars or blobs)");
}

Dataset gen_synthetic(SyntheticKind kind, std::size_t count, std::size_t image_size,
                      std::uint64_t seed, std::size_t n_classes, std::size_t channels) {
  if (count < 2) throw ContractError("synthetic datasets need at least 2 samples");
  if (image_size < 2) throw ContractError("synthetic images need at least 2x2 pixels");
  if (kind == SyntheticKind::kBars && n_classes != 2)
    throw ConfigError("bars has exactly 2 classes");
  if (kind == SyntheticKind::kBlobs && (n_classes < 2 || n_classes > 4))
    throw ConfigError("blobs supports 2 to 4 classes");

  Dataset d;
  d.count = count;
  d.channels = channels;
  d.height = d.width = image_size;
  d.n_classes = n_classes;
  d.labels.resize(count);
  d.pixels.resize(count * d.sample_size());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-0.1, 0.1);
  const std::size_t S = image_size;
  const double s = static_cast<double>(S);
  std::vector<double> plane(S * S);
  for (std::size_t i = 0; i < count; ++i) {
    const auto label = static_cast<std::uint8_t>(i % n_classes);
    d.labels[i] = label;
    if (kind == SyntheticKind::kBars) {
      const std::size_t bar = std::max<std::size_t>(1, S / 10);
      const double contrast = std::uniform_real_distribution<double>(0.6, 1.0)(rng);
      const double background = std::uniform_real_distribution<double>(0.0, 0.2)(rng);
      for (std::size_t y = 0; y < S; ++y)
        for (std::size_t x = 0; x < S; ++x) {
          const std::size_t coord = label == 0 ? y : x;
          plane[y * S + x] = ((coord / bar) % 2 == 0 ? contrast : background) + noise(rng);
        }
    } else {
      const double sigma = s / 8;
      std::uniform_real_distribution<double> jitter(-s / 8, s / 8);
      const double cx = ((label % 2) + 0.5) * s / 2 + jitter(rng);
      const double cy = ((label / 2) + 0.5) * s / 2 + jitter(rng);
      for (std::size_t y = 0; y < S; ++y)
        for (std::size_t x = 0; x < S; ++x) {
          const double dx = static_cast<double>(x) + 0.5 - cx;
          const double dy = static_cast<double>(y) + 0.5 - cy;
          plane[y * S + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) + noise(rng);
        }
    }
    std::uint8_t* dst = d.pixels.data() + i * d.sample_size();
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t j = 0; j < S * S; ++j)
        dst[c * S * S + j] =
            static_cast<std::uint8_t>(std::lround(std::clamp(plane[j], 0.0, 1.0) * 255.0));
  }
  return d;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& d, std::uint64_t seed,
                                            double val_fraction) {
  d.validate();
  if (!(val_fraction > 0 && val_fraction < 1))
    throw ConfigError("val_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(d.count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val =
      static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(d.count)));
  if (n_val == 0 || n_val >= d.count)
    throw ConfigError("dataset of " + std::to_string(d.count) + " samples is too small to split");
  const std::span<const std::size_t> all(order);
  return {d.subset(all.first(d.count - n_val)), d.subset(all.last(n_val))};
}

template Tensor<float> Dataset::images<float>(std::span<const std::size_t>) const;
template Tensor<double> Dataset::images<double>(std::span<const std::size_t>) const;

}  // namespace cavit
