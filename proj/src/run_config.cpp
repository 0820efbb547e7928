#include "cavit/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "cavit/errors.hpp"

namespace cavit {

std::string_view to_string(Source s) {
  switch (s) {
    case Source::kDefault: return "default";
    case Source::kFile: return "file";
    case Source::kFlag: return "flag";
    case Source::kEnv: return "env";
  }
  return "unknown";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string bad_value(std::string_view key, std::string_view value, std::string_view want) {
  return "invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
         std::string(want) + ")";
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError(bad_value(key, v, "an unsigned integer"));
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError(bad_value(key, v, "a real number"));
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(bad_value(key, v, "true or false"));
}

std::string fmt_real(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
};

template <typename M>
Field size_field(M member) {
  return {[member](const RunConfig& c) { return std::to_string(std::invoke(member, c)); },
          [member](RunConfig& c, std::string_view k, std::string_view v) {
            std::invoke(member, c) = static_cast<std::size_t>(parse_u64(k, v));
          }};
}

template <typename M>
Field real_field(M member) {
  return {[member](const RunConfig& c) { return fmt_real(std::invoke(member, c)); },
          [member](RunConfig& c, std::string_view k, std::string_view v) {
            std::invoke(member, c) = parse_real(k, v);
          }};
}

template <typename M>
Field path_field(M member) {
  return {[member](const RunConfig& c) { return std::invoke(member, c).string(); },
          [member](RunConfig& c, std::string_view, std::string_view v) {
            std::invoke(member, c) = std::filesystem::path(v);
          }};
}

// Empty means unset.
template <typename M>
Field optional_real_field(M member) {
  return {[member](const RunConfig& c) {
            const auto& o = std::invoke(member, c);
            return o ? fmt_real(*o) : std::string();
          },
          [member](RunConfig& c, std::string_view k, std::string_view v) {
            auto& o = std::invoke(member, c);
            if (v.empty())
              o.reset();
            else
              o = parse_real(k, v);
          }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    t.push_back({"variant",
                 {[](const RunConfig& c) { return std::string(to_string(c.model.variant)); },
                  [](RunConfig& c, std::string_view, std::string_view v) {
                    c.model.variant = parse_variant(v);
                  }}});
    t.push_back({"image_size", size_field([](auto& c) -> auto& { return c.model.image_size; })});
    t.push_back({"patch_size", size_field([](auto& c) -> auto& { return c.model.patch_size; })});
    t.push_back({"embed_dim", size_field([](auto& c) -> auto& { return c.model.embed_dim; })});
    t.push_back({"depth", size_field([](auto& c) -> auto& { return c.model.depth; })});
    t.push_back(
        {"spatial_heads", size_field([](auto& c) -> auto& { return c.model.spatial_heads; })});
    t.push_back(
        {"channel_heads", size_field([](auto& c) -> auto& { return c.model.channel_heads; })});
    t.push_back({"mlp_ratio", real_field([](auto& c) -> auto& { return c.model.mlp_ratio; })});
    t.push_back({"n_classes", size_field([](auto& c) -> auto& { return c.model.n_classes; })});
    t.push_back({"in_channels", size_field([](auto& c) -> auto& { return c.model.in_channels; })});
    t.push_back({"cls_projection",
                 {[](const RunConfig& c) { return std::string(to_string(c.model.cls_projection)); },
                  [](RunConfig& c, std::string_view, std::string_view v) {
                    c.model.cls_projection = parse_cls_projection(v);
                  }}});
    t.push_back({"channel_bias",
                 {[](const RunConfig& c) { return std::string(c.model.channel_bias ? "true" : "false"); },
                  [](RunConfig& c, std::string_view k, std::string_view v) {
                    c.model.channel_bias = parse_bool(k, v);
                  }}});
    t.push_back(
        {"learning_rate", real_field([](auto& c) -> auto& { return c.train.learning_rate; })});
    t.push_back({"epochs", size_field([](auto& c) -> auto& { return c.train.epochs; })});
    t.push_back({"batch_size", size_field([](auto& c) -> auto& { return c.train.batch_size; })});
    t.push_back({"seed",
                 {[](const RunConfig& c) { return std::to_string(c.train.seed); },
                  [](RunConfig& c, std::string_view k, std::string_view v) {
                    c.train.seed = parse_u64(k, v);
                  }}});
    t.push_back({"precision",
                 {[](const RunConfig& c) { return std::string(to_string(c.train.precision)); },
                  [](RunConfig& c, std::string_view, std::string_view v) {
                    c.train.precision = parse_precision(v);
                  }}});
    t.push_back({"stop_train_acc",
                 optional_real_field([](auto& c) -> auto& { return c.train.stop_train_acc; })});
    t.push_back({"stop_val_acc",
                 optional_real_field([](auto& c) -> auto& { return c.train.stop_val_acc; })});
    t.push_back({"data", path_field([](auto& c) -> auto& { return c.data; })});
    t.push_back({"val_data", path_field([](auto& c) -> auto& { return c.val_data; })});
    t.push_back({"val_fraction", real_field([](auto& c) -> auto& { return c.val_fraction; })});
    t.push_back({"out", path_field([](auto& c) -> auto& { return c.out; })});
    t.push_back({"checkpoint", path_field([](auto& c) -> auto& { return c.checkpoint; })});
    t.push_back({"synthetic_kind",
                 {[](const RunConfig& c) { return std::string(to_string(c.synthetic_kind)); },
                  [](RunConfig& c, std::string_view, std::string_view v) {
                    c.synthetic_kind = parse_synthetic_kind(v);
                  }}});
    t.push_back(
        {"synthetic_count", size_field([](auto& c) -> auto& { return c.synthetic_count; })});
    return t;
  }();
  return table;
}

const Field* find_field(std::string_view key) {
  for (const auto& [k, f] : fields())
    if (k == key) return &f;
  return nullptr;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> ks = [] {
    std::vector<std::string> out;
    for (const auto& [k, f] : fields()) out.push_back(k);
    return out;
  }();
  return ks;
}

void RunConfig::set(std::string_view key, std::string_view value, Source source) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown key '" + std::string(key) + "'");
  f->set(*this, key, value);
  sources_.insert_or_assign(std::string(key), source);
}

std::string RunConfig::get(std::string_view key) const {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown key '" + std::string(key) + "'");
  return f->get(*this);
}

Source RunConfig::source_of(std::string_view key) const {
  if (!find_field(key)) throw ConfigError("unknown key '" + std::string(key) + "'");
  auto it = sources_.find(key);
  return it == sources_.end() ? Source::kDefault : it->second;
}

void RunConfig::apply_text(std::string_view text, std::string_view origin, Source source) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(where + "expected key = value, got '" + std::string(line) + "'");
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), source);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str(), path.string(), Source::kFile);
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("--set expects key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), Source::kFlag);
}

std::string RunConfig::to_text() const {
  std::size_t width = 0;
  for (const auto& [k, f] : fields()) width = std::max(width, k.size());
  std::string out;
  for (const auto& [k, f] : fields()) {
    out += k + std::string(width - k.size(), ' ') + " = " + f.get(*this);
    out += "  # " + std::string(to_string(source_of(k))) + "\n";
  }
  return out;
}

std::filesystem::path RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? out / "best.cavt" : checkpoint;
}

}  // namespace cavit
