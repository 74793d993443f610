#pragma once

// Run configuration: one human-readable `key = value` document per run,
// stored next to the outputs so that runs can be diffed.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmim/objectives.hpp"

namespace cmim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Preset { desk, paper_shape };

std::string_view preset_name(Preset p) noexcept;
Preset parse_preset(std::string_view name);

/// One-line statement of how the preset deviates from the original protocol.
std::string preset_banner(Preset p);

struct RunConfig {
  Preset preset = Preset::desk;

  // Single training run.
  Variant variant = Variant::cMIM;
  std::string dataset = "synth_blobs:1";  // "synth_blobs:<seed>" or "idx:<manifest name>"
  int latent_dim = 16;
  std::vector<int> hidden{64, 64};
  int batch_size = 64;
  long total_steps = 12000;
  std::uint64_t seed = 0;
  double tau = 0.1;
  double lr = 1e-3;
  double warmup_frac = 0.1;
  double decay_frac = 0.1;
  long val_interval = 500;
  bool augment = true;
  std::string out_dir = "runs";

  // Synthetic dataset shape.
  int synth_classes = 10;
  int synth_per_class = 200;
  int synth_side = 12;
  double synth_jitter = 0.12;
  double synth_noise = 0.1;

  // Downstream probes.
  long probe_steps = 1000;

  // Sensitivity grid.
  std::vector<Variant> grid_variants{Variant::cMIM, Variant::MIM, Variant::InfoNCE};
  std::vector<int> grid_batch_sizes{4, 16, 64};
  std::vector<std::string> grid_datasets{"synth_blobs:1", "synth_blobs:2", "synth_blobs:3"};
  int grid_seeds = 3;

  // 2D toy.
  long toy_steps = 4200;
  double toy_lr = 50.0;
  double toy_tau = 1.0;
  std::vector<long> toy_snapshots{0, 200, 400};

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

RunConfig preset_config(Preset p);

/// Applies `key = value` lines ('#' starts a comment) on top of `base`.
/// Unknown keys and malformed values raise ConfigError.
RunConfig parse_config(const std::string& text, RunConfig base);
RunConfig load_config(const std::filesystem::path& path, RunConfig base);

/// Every key, one per line, in a fixed order.
std::string to_string(const RunConfig& config);
void save_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace cmim
