#include "cmim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cmim {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += fmt(xs[i]);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"preset", [](RunConfig& c, auto&, auto& v) { c.preset = parse_preset(v); }},
      {"variant",
       [](RunConfig& c, auto&, auto& v) {
         try {
           c.variant = parse_variant(v);
         } catch (const std::exception& e) {
           throw ConfigError(e.what());
         }
       }},
      {"dataset", [](RunConfig& c, auto&, auto& v) { c.dataset = v; }},
      {"latent_dim", [](RunConfig& c, auto& k, auto& v) { c.latent_dim = parse_integer<int>(k, v); }},
      {"hidden",
       [](RunConfig& c, auto& k, auto& v) {
         c.hidden.clear();
         for (const auto& s : split_list(v)) c.hidden.push_back(parse_integer<int>(k, s));
       }},
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.batch_size = parse_integer<int>(k, v); }},
      {"total_steps", [](RunConfig& c, auto& k, auto& v) { c.total_steps = parse_integer<long>(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.seed = parse_integer<std::uint64_t>(k, v); }},
      {"tau", [](RunConfig& c, auto& k, auto& v) { c.tau = parse_real(k, v); }},
      {"lr", [](RunConfig& c, auto& k, auto& v) { c.lr = parse_real(k, v); }},
      {"warmup_frac", [](RunConfig& c, auto& k, auto& v) { c.warmup_frac = parse_real(k, v); }},
      {"decay_frac", [](RunConfig& c, auto& k, auto& v) { c.decay_frac = parse_real(k, v); }},
      {"val_interval", [](RunConfig& c, auto& k, auto& v) { c.val_interval = parse_integer<long>(k, v); }},
      {"augment", [](RunConfig& c, auto& k, auto& v) { c.augment = parse_bool(k, v); }},
      {"out_dir", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }},
      {"synth_classes", [](RunConfig& c, auto& k, auto& v) { c.synth_classes = parse_integer<int>(k, v); }},
      {"synth_per_class", [](RunConfig& c, auto& k, auto& v) { c.synth_per_class = parse_integer<int>(k, v); }},
      {"synth_side", [](RunConfig& c, auto& k, auto& v) { c.synth_side = parse_integer<int>(k, v); }},
      {"synth_jitter", [](RunConfig& c, auto& k, auto& v) { c.synth_jitter = parse_real(k, v); }},
      {"synth_noise", [](RunConfig& c, auto& k, auto& v) { c.synth_noise = parse_real(k, v); }},
      {"probe_steps", [](RunConfig& c, auto& k, auto& v) { c.probe_steps = parse_integer<long>(k, v); }},
      {"grid_variants",
       [](RunConfig& c, auto&, auto& v) {
         c.grid_variants.clear();
         for (const auto& s : split_list(v)) {
           try {
             c.grid_variants.push_back(parse_variant(s));
           } catch (const std::exception& e) {
             throw ConfigError(e.what());
           }
         }
       }},
      {"grid_batch_sizes",
       [](RunConfig& c, auto& k, auto& v) {
         c.grid_batch_sizes.clear();
         for (const auto& s : split_list(v)) c.grid_batch_sizes.push_back(parse_integer<int>(k, s));
       }},
      {"grid_datasets", [](RunConfig& c, auto&, auto& v) { c.grid_datasets = split_list(v); }},
      {"grid_seeds", [](RunConfig& c, auto& k, auto& v) { c.grid_seeds = parse_integer<int>(k, v); }},
      {"toy_steps", [](RunConfig& c, auto& k, auto& v) { c.toy_steps = parse_integer<long>(k, v); }},
      {"toy_lr", [](RunConfig& c, auto& k, auto& v) { c.toy_lr = parse_real(k, v); }},
      {"toy_tau", [](RunConfig& c, auto& k, auto& v) { c.toy_tau = parse_real(k, v); }},
      {"toy_snapshots",
       [](RunConfig& c, auto& k, auto& v) {
         c.toy_snapshots.clear();
         for (const auto& s : split_list(v)) c.toy_snapshots.push_back(parse_integer<long>(k, s));
       }},
  };
  return table;
}

}  // namespace

std::string_view preset_name(Preset p) noexcept {
  return p == Preset::desk ? "desk" : "paper-shape";
}

Preset parse_preset(std::string_view name) {
  if (name == "desk") return Preset::desk;
  if (name == "paper-shape" || name == "paper_shape") return Preset::paper_shape;
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper-shape)");
}

std::string preset_banner(Preset p) {
  if (p == Preset::desk) {
    return "preset desk: reduced scale (MLP 64-64 backbone, D_z=16, 12000 steps, batch grid "
           "{4,16,64}, 3 synthetic blob datasets, 3 seeds); not the original 1M-step "
           "15-dataset protocol";
  }
  return "preset paper-shape: original protocol shape (1M steps, batch grid {2,5,10,100,200}, "
         "D_z=64) with an MLP 128-128 backbone in place of the Perceiver";
}

RunConfig preset_config(Preset p) {
  RunConfig c;
  c.preset = p;
  if (p == Preset::paper_shape) {
    c.latent_dim = 64;
    c.hidden = {128, 128};
    c.batch_size = 100;
    c.total_steps = 1'000'000;
    c.val_interval = 10'000;
    c.synth_side = 28;
    c.synth_per_class = 1000;
    c.grid_variants = {Variant::cMIM, Variant::MIM, Variant::VAE, Variant::AE, Variant::InfoNCE};
    c.grid_batch_sizes = {2, 5, 10, 100, 200};
    c.grid_seeds = 1;
  }
  return c;
}

void RunConfig::validate() const {
  const auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (latent_dim < 1) fail("latent_dim must be >= 1");
  if (hidden.empty()) fail("hidden must list at least one width");
  for (int h : hidden)
    if (h < 1) fail("hidden widths must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (is_contrastive(variant) && batch_size < 2) fail("contrastive variants need batch_size >= 2");
  if (total_steps < 1) fail("total_steps must be >= 1");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (warmup_frac < 0 || decay_frac < 0 || warmup_frac + decay_frac > 1.0)
    fail("warmup_frac and decay_frac must be non-negative and sum to at most 1");
  if (val_interval < 1) fail("val_interval must be >= 1");
  if (dataset.empty()) fail("dataset must be set");
  if (synth_classes < 2 || synth_per_class < 1 || synth_side < 8)
    fail("synthetic dataset needs >= 2 classes, >= 1 sample per class and side >= 8");
  if (synth_jitter < 0 || synth_noise < 0) fail("synth_jitter and synth_noise must be >= 0");
  if (probe_steps < 1) fail("probe_steps must be >= 1");
  if (grid_variants.empty()) fail("grid_variants must not be empty");
  std::vector<int> bs = grid_batch_sizes;
  std::sort(bs.begin(), bs.end());
  bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
  if (bs.size() < 2) fail("grid_batch_sizes needs at least two distinct batch sizes");
  if (bs.front() < 2) fail("grid batch sizes must be >= 2");
  if (grid_datasets.empty()) fail("grid_datasets must not be empty");
  if (grid_seeds < 1) fail("grid_seeds must be >= 1");
  if (toy_steps < 0 || !(toy_lr > 0.0) || !(toy_tau > 0.0)) fail("invalid toy settings");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(base, key, value);
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string to_string(const RunConfig& c) {
  const auto ints = [](const auto& xs) { return join(xs, [](auto x) { return std::to_string(x); }); };
  std::ostringstream o;
  o << "# " << preset_banner(c.preset) << '\n'
    << "preset = " << preset_name(c.preset) << '\n'
    << "variant = " << variant_name(c.variant) << '\n'
    << "dataset = " << c.dataset << '\n'
    << "latent_dim = " << c.latent_dim << '\n'
    << "hidden = " << ints(c.hidden) << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "total_steps = " << c.total_steps << '\n'
    << "seed = " << c.seed << '\n'
    << "tau = " << real_text(c.tau) << '\n'
    << "lr = " << real_text(c.lr) << '\n'
    << "warmup_frac = " << real_text(c.warmup_frac) << '\n'
    << "decay_frac = " << real_text(c.decay_frac) << '\n'
    << "val_interval = " << c.val_interval << '\n'
    << "augment = " << (c.augment ? "true" : "false") << '\n'
    << "out_dir = " << c.out_dir << '\n'
    << "synth_classes = " << c.synth_classes << '\n'
    << "synth_per_class = " << c.synth_per_class << '\n'
    << "synth_side = " << c.synth_side << '\n'
    << "synth_jitter = " << real_text(c.synth_jitter) << '\n'
    << "synth_noise = " << real_text(c.synth_noise) << '\n'
    << "probe_steps = " << c.probe_steps << '\n'
    << "grid_variants = "
    << join(c.grid_variants, [](Variant v) { return std::string(variant_name(v)); }) << '\n'
    << "grid_batch_sizes = " << ints(c.grid_batch_sizes) << '\n'
    << "grid_datasets = " << join(c.grid_datasets, [](const std::string& s) { return s; }) << '\n'
    << "grid_seeds = " << c.grid_seeds << '\n'
    << "toy_steps = " << c.toy_steps << '\n'
    << "toy_lr = " << real_text(c.toy_lr) << '\n'
    << "toy_tau = " << real_text(c.toy_tau) << '\n'
    << "toy_snapshots = " << ints(c.toy_snapshots) << '\n';
  return o.str();
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_string(config);
}

}  // namespace cmim
