#pragma once

// Datasets, splits, deterministic batching, and the 2D toy point set.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmim/nn.hpp"

namespace cmim {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Images are rows of a N x D_x matrix with values in [0, 1].
struct Dataset {
  std::string name;
  int image_side = 0;  // 0 when rows are not square images
  int num_classes = 0;
  Matrix images;
  std::vector<int> labels;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  std::size_t size() const noexcept { return labels.size(); }
  int input_dim() const noexcept { return static_cast<int>(images.cols()); }
  /// Splits disjoint and covering, labels in range, pixel values in [0, 1].
  void validate() const;
  Matrix rows(const std::vector<std::size_t>& idx) const;
  std::vector<int> labels_of(const std::vector<std::size_t>& idx) const;
};

/// Fraction of samples held out as test, and fraction of the remainder used
/// for validation when a dataset has no default validation split.
struct SplitFractions {
  double test = 0.25;
  double val = 0.05;
};

/// Shuffles with `seed` and assigns train/val/test.
void assign_splits(Dataset& ds, SplitFractions fractions, std::uint64_t seed);

/// Class-specific Gaussian blob patterns with per-sample jitter and pixel
/// noise; balanced classes; deterministic per seed.
struct BlobStyle {
  double jitter = 0.06;       // std of blob centre displacement, fraction of the side
  double pixel_noise = 0.05;  // std of additive pixel noise before clamping
};

Dataset synth_blobs(int num_classes, int per_class, int image_side, std::uint64_t seed,
                    SplitFractions fractions = {}, BlobStyle style = {});

/// Dataset manifest row (CSV columns: name,train_images,train_labels,
/// test_images,test_labels,train_size,test_size). Paths are relative to the
/// data root unless absolute; a size of 0 keeps every sample.
struct ManifestEntry {
  std::string name;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Loads IDX image/label pairs; takes the first train_size/test_size samples,
/// carves 5% of train as validation.
Dataset load_idx_dataset(const ManifestEntry& entry, const std::filesystem::path& data_root);

/// Index blocks for one epoch over `indices`: seeded shuffle per (seed, epoch),
/// optionally dropping the final short block.
std::vector<std::vector<std::size_t>> batches(const std::vector<std::size_t>& indices,
                                              std::size_t batch_size, std::uint64_t seed,
                                              std::uint64_t epoch, bool drop_last);

/// 1000 points with both coordinates uniform in (0.1, 2.0).
struct ToySet2D {
  Matrix points;  // N x 2
};

inline constexpr int kToyPointCount = 1000;

ToySet2D make_toy2d(std::uint64_t seed);

/// Mixes a base seed with a stream id into an independent generator seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace cmim
