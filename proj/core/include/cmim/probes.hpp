#pragma once

// Downstream classifiers trained on frozen embeddings: 5-nearest-neighbour
// (cosine or Euclidean) and a one-hidden-layer MLP.

#include <cstdint>
#include <string_view>
#include <vector>

#include "cmim/nn.hpp"

namespace cmim {

enum class KnnMetric { cosine, euclidean };

std::string_view knn_metric_name(KnnMetric m) noexcept;

inline constexpr int kKnnNeighbours = 5;

/// Majority vote over the 5 nearest training rows. Distance ties go to the
/// lower training index; vote ties go to the smallest tied label.
std::vector<int> knn5_predict(const Matrix& train_emb, const std::vector<int>& train_labels,
                              const Matrix& test_emb, KnnMetric metric);

double knn5(const Matrix& train_emb, const std::vector<int>& train_labels, const Matrix& test_emb,
            const std::vector<int>& test_labels, KnnMetric metric);

struct MlpProbeConfig {
  int hidden = 400;
  long steps = 1000;
  int batch_size = 32;
  double lr = 1e-3;
};

/// Trains a ReLU hidden layer + softmax classifier with Adam; returns test
/// accuracy. Deterministic per seed.
double mlp_probe(const Matrix& train_emb, const std::vector<int>& train_labels,
                 const Matrix& test_emb, const std::vector<int>& test_labels, std::uint64_t seed,
                 const MlpProbeConfig& config = {});

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace cmim
