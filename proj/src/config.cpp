#include "sscc/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sscc/error.hpp"

namespace sscc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(trim(part));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value '" + value + "' for " + key);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto v = trim(value);
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Field number(Access access) {
  return {[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_number<T>(k, v); },
          [access](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt(access(const_cast<RunConfig&>(c)));
            else
              return std::to_string(access(const_cast<RunConfig&>(c)));
          }};
}

template <typename Access>
Field boolean(Access access) {
  return {[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_bool(k, v); },
          [access](const RunConfig& c) { return fmt(access(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field text(Access access) {
  return {[access](RunConfig& c, const std::string&, const std::string& v) { access(c) = trim(v); },
          [access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)); }};
}

using Table = std::vector<std::pair<std::string, Field>>;

const Table& table() {
  static const Table t = [] {
    Table t;
    t.emplace_back("cube", text([](RunConfig& c) -> std::string& { return c.cube; }));
    t.emplace_back("labels", text([](RunConfig& c) -> std::string& { return c.labels; }));
    t.emplace_back("checkpoint", text([](RunConfig& c) -> std::string& { return c.checkpoint; }));
    t.emplace_back("out_dir", text([](RunConfig& c) -> std::string& { return c.out_dir; }));
    t.emplace_back("seed", number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.seed; }));
    t.emplace_back("pca_components", number<int>([](RunConfig& c) -> int& { return c.pca_components; }));
    t.emplace_back("patch_side", number<int>([](RunConfig& c) -> int& { return c.patch_side; }));

    t.emplace_back("network.blocks",
                   Field{[](RunConfig& c, const std::string&, const std::string& v) {
                           c.network.conv_blocks = parse_blocks(v);
                         },
                         [](const RunConfig& c) { return format_blocks(c.network.conv_blocks); }});
    t.emplace_back("network.residual", boolean([](RunConfig& c) -> bool& { return c.network.residual; }));
    t.emplace_back("network.latent_dim", number<int>([](RunConfig& c) -> int& { return c.network.latent_dim; }));
    t.emplace_back("network.head_hidden", number<int>([](RunConfig& c) -> int& { return c.network.head_hidden; }));
    t.emplace_back("network.clusters", number<int>([](RunConfig& c) -> int& { return c.network.cluster_count; }));

    t.emplace_back("train.batch_size", number<int>([](RunConfig& c) -> int& { return c.train.batch_size; }));
    t.emplace_back("train.epochs", number<int>([](RunConfig& c) -> int& { return c.train.epochs; }));
    t.emplace_back("train.base_lr", number<double>([](RunConfig& c) -> double& { return c.train.base_lr; }));
    t.emplace_back("train.lr_decay_factor",
                   number<double>([](RunConfig& c) -> double& { return c.train.lr_decay_factor; }));
    t.emplace_back("train.decay_interval_epochs",
                   number<int>([](RunConfig& c) -> int& { return c.train.decay_interval_epochs; }));
    t.emplace_back("train.weight_decay", number<double>([](RunConfig& c) -> double& { return c.train.weight_decay; }));
    t.emplace_back("train.adam_beta1", number<double>([](RunConfig& c) -> double& { return c.train.adam.beta1; }));
    t.emplace_back("train.adam_beta2", number<double>([](RunConfig& c) -> double& { return c.train.adam.beta2; }));
    t.emplace_back("train.adam_epsilon", number<double>([](RunConfig& c) -> double& { return c.train.adam.epsilon; }));

    t.emplace_back("loss.tau", number<double>([](RunConfig& c) -> double& { return c.train.loss.tau; }));
    t.emplace_back("loss.lambda", number<double>([](RunConfig& c) -> double& { return c.train.loss.lambda; }));
    t.emplace_back("loss.alpha", number<double>([](RunConfig& c) -> double& { return c.train.loss.alpha; }));
    t.emplace_back("loss.use_between", boolean([](RunConfig& c) -> bool& { return c.train.loss.use_between; }));

    for (auto kind : kAllTransforms) {
      const std::string name(transform_name(kind));
      t.emplace_back("aug." + name + ".enabled",
                     boolean([kind](RunConfig& c) -> bool& { return c.pool.entry(kind).enabled; }));
      t.emplace_back("aug." + name + ".prob",
                     number<double>([kind](RunConfig& c) -> double& { return c.pool.entry(kind).probability; }));
    }
    t.emplace_back("aug.crop_scale_lo", number<double>([](RunConfig& c) -> double& { return c.pool.crop_scale_lo; }));
    t.emplace_back("aug.crop_scale_hi", number<double>([](RunConfig& c) -> double& { return c.pool.crop_scale_hi; }));
    t.emplace_back("aug.rotation_quarters",
                   Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                           std::vector<int> q;
                           for (const auto& part : split(v, ','))
                             if (!part.empty()) q.push_back(parse_number<int>(k, part));
                           c.pool.rotation_quarters = q;
                         },
                         [](const RunConfig& c) {
                           std::string s;
                           for (int q : c.pool.rotation_quarters) s += (s.empty() ? "" : ",") + std::to_string(q);
                           return s;
                         }});
    t.emplace_back("aug.blur_sigma_lo", number<double>([](RunConfig& c) -> double& { return c.pool.blur_sigma_lo; }));
    t.emplace_back("aug.blur_sigma_hi", number<double>([](RunConfig& c) -> double& { return c.pool.blur_sigma_hi; }));
    t.emplace_back("aug.pixel_erase_fraction",
                   number<double>([](RunConfig& c) -> double& { return c.pool.pixel_erase_fraction; }));
    t.emplace_back("aug.band_erase_fraction",
                   number<double>([](RunConfig& c) -> double& { return c.pool.band_erase_fraction; }));
    t.emplace_back("aug.band_groups", number<int>([](RunConfig& c) -> int& { return c.pool.band_group_count; }));
    t.emplace_back("aug.spectral_prob", number<double>([](RunConfig& c) -> double& { return c.pool.spectral_prob; }));
    return t;
  }();
  return t;
}

const Field& field(const std::string& key) {
  for (const auto& [k, f] : table())
    if (k == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { field(trim(key)).set(*this, trim(key), value); }

void RunConfig::validate() const {
  if (pca_components < 0) throw ConfigError("pca_components must be >= 0");
  if (patch_side < 1 || patch_side % 2 == 0) throw ConfigError("patch_side must be a positive odd number");
  network.validate();
  train.validate();
  pool.validate();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : table()) keys.push_back(k);
  return keys;
}

std::string config_value(const RunConfig& config, const std::string& key) { return field(key).get(config); }

void load_config_file(const std::filesystem::path& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      config.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  for (const auto& [k, f] : table()) out += k + " = " + f.get(config) + "\n";
  return out;
}

std::vector<ConvBlockSpec> parse_blocks(const std::string& text) {
  std::vector<ConvBlockSpec> blocks;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    const auto fields = split(part, ':');
    if (fields.empty() || fields.size() > 3) bad_value("network.blocks", text);
    ConvBlockSpec b;
    b.out_channels = parse_number<int>("network.blocks", fields[0]);
    if (fields.size() > 1) b.kernel = parse_number<int>("network.blocks", fields[1]);
    if (fields.size() > 2) b.stride = parse_number<int>("network.blocks", fields[2]);
    blocks.push_back(b);
  }
  return blocks;
}

std::string format_blocks(const std::vector<ConvBlockSpec>& blocks) {
  std::string s;
  for (const auto& b : blocks) {
    if (!s.empty()) s += ",";
    s += std::to_string(b.out_channels) + ":" + std::to_string(b.kernel) + ":" + std::to_string(b.stride);
  }
  return s;
}

}  // namespace sscc
