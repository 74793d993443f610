#pragma once

// CMM1 checkpoint files:
//   bytes 0..3   ASCII "CMM1"
//   bytes 4..7   uint32 little-endian length N of the metadata document
//   next N bytes UTF-8 JSON metadata (variant, dims, step, validation loss, seed, ...)
//   remainder    parameters as little-endian IEEE-754 float64: encoder layers
//                then decoder layers, each layer weight (row-major out x in)
//                followed by its bias.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "cmim/objectives.hpp"

namespace cmim {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  Variant variant = Variant::cMIM;
  ModelDims dims;
  double tau = 1.0;
  long step = 0;
  double val_loss = 0.0;
  std::uint64_t seed = 0;
  int batch_size = 0;
  std::string dataset;
  std::string run_name;
};

struct Checkpoint {
  CheckpointMeta meta;
  ModelBundle model;
};

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& model,
                     const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cmim
