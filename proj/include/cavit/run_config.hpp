#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cavit/config.hpp"
#include "cavit/dataset.hpp"
#include "cavit/train.hpp"

namespace cavit {

enum class Source { kDefault, kFile, kFlag, kEnv };
std::string_view to_string(Source s);

/// Everything a subcommand needs, resolved from defaults, a key=value file
/// and --set overrides, in that order. Each key remembers where its value
/// came from.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path data;      // training (or evaluation) dataset
  std::filesystem::path val_data;  // empty: split `data` by seed
  double val_fraction = 0.2;
  std::filesystem::path out = "out";
  std::filesystem::path checkpoint;  // empty: <out>/best.cavt
  SyntheticKind synthetic_kind = SyntheticKind::kBars;
  std::size_t synthetic_count = 640;

  /// Keys in print order.
  static const std::vector<std::string>& keys();

  /// ConfigError on an unknown key or unparsable value.
  void set(std::string_view key, std::string_view value, Source source);
  std::string get(std::string_view key) const;
  Source source_of(std::string_view key) const;

  /// Applies "key = value" lines. '#' starts a comment; blank lines are
  /// skipped. Errors name `origin` and the line number.
  void apply_text(std::string_view text, std::string_view origin, Source source);
  void apply_file(const std::filesystem::path& path);
  /// "key=value" with the flag source.
  void apply_override(std::string_view assignment);

  /// One "key = value  # source" line per key; reparses to the same values.
  std::string to_text() const;

  std::filesystem::path checkpoint_path() const;

 private:
  std::map<std::string, Source, std::less<>> sources_;
};

}  // namespace cavit
