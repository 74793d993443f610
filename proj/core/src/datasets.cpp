#include "cmim/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cmim/idx.hpp"

namespace cmim {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(images.rows()) != labels.size()) {
    throw DataError(name + ": image/label count mismatch");
  }
  std::vector<char> seen(labels.size(), 0);
  for (const auto* split : {&train, &val, &test}) {
    for (std::size_t i : *split) {
      if (i >= labels.size()) throw DataError(name + ": split index out of range");
      if (seen[i]++) throw DataError(name + ": splits overlap at index " + std::to_string(i));
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw DataError(name + ": splits do not cover the dataset");
  }
  for (int l : labels) {
    if (l < 0 || l >= num_classes) throw DataError(name + ": label out of range");
  }
  if (images.size() > 0 && (images.minCoeff() < 0.0 || images.maxCoeff() > 1.0)) {
    throw DataError(name + ": pixel values outside [0, 1]");
  }
}

Matrix Dataset::rows(const std::vector<std::size_t>& idx) const {
  Matrix out(static_cast<Eigen::Index>(idx.size()), images.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = images.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

std::vector<int> Dataset::labels_of(const std::vector<std::size_t>& idx) const {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels.at(i));
  return out;
}

void assign_splits(Dataset& ds, SplitFractions fractions, std::uint64_t seed) {
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5B11));
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = order.size();
  const auto n_test = static_cast<std::size_t>(std::llround(fractions.test * static_cast<double>(n)));
  const auto rest = n - n_test;
  auto n_val = static_cast<std::size_t>(std::llround(fractions.val * static_cast<double>(rest)));
  if (rest >= 4) n_val = std::max<std::size_t>(n_val, 2);

  ds.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  ds.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  ds.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  for (auto* split : {&ds.train, &ds.val, &ds.test}) std::sort(split->begin(), split->end());
}

Dataset synth_blobs(int num_classes, int per_class, int image_side, std::uint64_t seed,
                    SplitFractions fractions, BlobStyle style) {
  if (image_side < 8) throw ContractViolation("synth_blobs: image_side must be >= 8");
  if (num_classes < 1 || per_class < 0) throw ContractViolation("synth_blobs: bad class counts");

  constexpr int kBlobsPerClass = 3;
  struct Blob {
    double cx, cy, width, amplitude;
  };
  const auto side = static_cast<double>(image_side);

  Rng proto_rng(derive_seed(seed, 1));
  std::uniform_real_distribution<double> pos(0.2 * side, 0.8 * side);
  std::uniform_real_distribution<double> width(0.07 * side, 0.16 * side);
  std::uniform_real_distribution<double> amp(0.6, 1.0);
  std::vector<std::vector<Blob>> prototypes(static_cast<std::size_t>(num_classes));
  for (auto& blobs : prototypes) {
    for (int k = 0; k < kBlobsPerClass; ++k) {
      blobs.push_back({pos(proto_rng), pos(proto_rng), width(proto_rng), amp(proto_rng)});
    }
  }

  Dataset ds;
  ds.name = "synth_blobs_s" + std::to_string(seed);
  ds.image_side = image_side;
  ds.num_classes = num_classes;
  const int n = num_classes * per_class;
  ds.images.resize(n, image_side * image_side);
  ds.labels.resize(static_cast<std::size_t>(n));

  Rng rng(derive_seed(seed, 2));
  std::normal_distribution<double> jitter(0.0, style.jitter * side);
  std::uniform_real_distribution<double> gain(0.7, 1.0);
  std::normal_distribution<double> pixel_noise(0.0, style.pixel_noise);
  int row = 0;
  // Interleave classes so that any prefix is roughly balanced.
  for (int s = 0; s < per_class; ++s) {
    for (int c = 0; c < num_classes; ++c, ++row) {
      std::vector<Blob> blobs = prototypes[static_cast<std::size_t>(c)];
      for (auto& b : blobs) {
        b.cx += jitter(rng);
        b.cy += jitter(rng);
        b.amplitude *= gain(rng);
      }
      for (int y = 0; y < image_side; ++y) {
        for (int x = 0; x < image_side; ++x) {
          double v = 0.0;
          for (const auto& b : blobs) {
            const double dx = x - b.cx, dy = y - b.cy;
            v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.width * b.width));
          }
          v += pixel_noise(rng);
          ds.images(row, y * image_side + x) = std::clamp(v, 0.0, 1.0);
        }
      }
      ds.labels[static_cast<std::size_t>(row)] = c;
    }
  }
  assign_splits(ds, fractions, seed);
  ds.validate();
  return ds;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (header) {
      header = false;
      if (!cols.empty() && cols.front() == "name") continue;
    }
    if (cols.size() != 7) {
      throw DataError("manifest row needs 7 columns: " + line);
    }
    ManifestEntry e;
    e.name = cols[0];
    e.train_images = cols[1];
    e.train_labels = cols[2];
    e.test_images = cols[3];
    e.test_labels = cols[4];
    try {
      e.train_size = std::stoul(cols[5]);
      e.test_size = std::stoul(cols[6]);
    } catch (const std::exception&) {
      throw DataError("manifest sizes must be integers: " + line);
    }
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& root, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : root / path;
}

}  // namespace

Dataset load_idx_dataset(const ManifestEntry& entry, const std::filesystem::path& data_root) {
  auto load_pair = [&](const std::string& img, const std::string& lab, std::size_t limit) {
    IdxTensor images = read_idx(resolve(data_root, img));
    IdxTensor labels = read_idx(resolve(data_root, lab));
    if (images.rank() < 2 || labels.rank() != 1 || images.dims[0] != labels.dims[0]) {
      throw DataError(entry.name + ": image/label IDX files do not pair up");
    }
    Matrix x = images.to_unit_rows();
    std::vector<int> y = labels.to_labels();
    const std::size_t n = limit == 0 ? y.size() : std::min<std::size_t>(limit, y.size());
    return std::pair{Matrix(x.topRows(static_cast<Eigen::Index>(n))),
                     std::vector<int>(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n))};
  };
  auto [train_x, train_y] = load_pair(entry.train_images, entry.train_labels, entry.train_size);
  auto [test_x, test_y] = load_pair(entry.test_images, entry.test_labels, entry.test_size);
  if (train_x.cols() != test_x.cols()) throw DataError(entry.name + ": train/test widths differ");

  Dataset ds;
  ds.name = entry.name;
  const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(train_x.cols()))));
  ds.image_side = side * side == train_x.cols() ? side : 0;
  ds.images.resize(train_x.rows() + test_x.rows(), train_x.cols());
  ds.images << train_x, test_x;
  ds.labels = train_y;
  ds.labels.insert(ds.labels.end(), test_y.begin(), test_y.end());
  ds.num_classes = ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;

  const std::size_t n_train = train_y.size();
  const auto n_val = static_cast<std::size_t>(std::llround(0.05 * static_cast<double>(n_train)));
  for (std::size_t i = 0; i < n_train; ++i) {
    (i < n_train - n_val ? ds.train : ds.val).push_back(i);
  }
  for (std::size_t i = n_train; i < ds.labels.size(); ++i) ds.test.push_back(i);
  ds.validate();
  return ds;
}

std::vector<std::vector<std::size_t>> batches(const std::vector<std::size_t>& indices,
                                              std::size_t batch_size, std::uint64_t seed,
                                              std::uint64_t epoch, bool drop_last) {
  if (batch_size < 1) throw ContractViolation("batch_size must be >= 1");
  std::vector<std::size_t> order = indices;
  Rng rng(derive_seed(seed, 0xE90C0000ULL + epoch));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    if (drop_last && end - start < batch_size) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

ToySet2D make_toy2d(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x70F));
  std::uniform_real_distribution<double> u(0.1, 2.0);
  ToySet2D t;
  t.points.resize(kToyPointCount, 2);
  for (int i = 0; i < kToyPointCount; ++i) {
    t.points(i, 0) = u(rng);
    t.points(i, 1) = u(rng);
  }
  return t;
}

}  // namespace cmim
