#include "cmim/probes.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "cmim/datasets.hpp"

namespace cmim {

std::string_view knn_metric_name(KnnMetric m) noexcept {
  return m == KnnMetric::cosine ? "knn5_cosine" : "knn5_euclidean";
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw ContractViolation("accuracy: size mismatch");
  if (truth.empty()) throw DomainError("accuracy of an empty test set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<int> knn5_predict(const Matrix& train_emb, const std::vector<int>& train_labels,
                              const Matrix& test_emb, KnnMetric metric) {
  const Eigen::Index n = train_emb.rows();
  if (n < kKnnNeighbours) throw ContractViolation("knn5 needs at least 5 training points");
  if (static_cast<std::size_t>(n) != train_labels.size()) {
    throw ContractViolation("knn5: label count mismatch");
  }
  if (train_emb.cols() != test_emb.cols()) throw ContractViolation("knn5: dimension mismatch");

  Matrix train = train_emb;
  Matrix test = test_emb;
  if (metric == KnnMetric::cosine) {
    auto normalise = [](Matrix& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double norm = m.row(r).norm();
        if (!(norm > 0.0)) throw DomainError("knn5 cosine: zero-norm embedding");
        m.row(r) /= norm;
      }
    };
    normalise(train);
    normalise(test);
  }
  // Distances per test row: 1 - cos for cosine, squared L2 for Euclidean.
  Matrix dist;
  if (metric == KnnMetric::cosine) {
    dist = (-(test * train.transpose())).array() + 1.0;
  } else {
    const Vector tn = test.rowwise().squaredNorm();
    const Vector rn = train.rowwise().squaredNorm();
    dist = (-2.0 * test * train.transpose()).colwise() + tn;
    dist.rowwise() += rn.transpose();
  }

  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(test.rows()));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index q = 0; q < test.rows(); ++q) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + kKnnNeighbours, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                        const double da = dist(q, a), db = dist(q, b);
                        return da < db || (da == db && a < b);
                      });
    std::map<int, int> votes;
    for (int k = 0; k < kKnnNeighbours; ++k) {
      ++votes[train_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]];
    }
    int best_label = votes.begin()->first, best_count = -1;
    for (const auto& [label, count] : votes) {  // ascending labels
      if (count > best_count) {
        best_label = label;
        best_count = count;
      }
    }
    out.push_back(best_label);
  }
  return out;
}

double knn5(const Matrix& train_emb, const std::vector<int>& train_labels, const Matrix& test_emb,
            const std::vector<int>& test_labels, KnnMetric metric) {
  return accuracy(knn5_predict(train_emb, train_labels, test_emb, metric), test_labels);
}

double mlp_probe(const Matrix& train_emb, const std::vector<int>& train_labels,
                 const Matrix& test_emb, const std::vector<int>& test_labels, std::uint64_t seed,
                 const MlpProbeConfig& config) {
  if (static_cast<std::size_t>(train_emb.rows()) != train_labels.size() || train_labels.empty()) {
    throw ContractViolation("mlp_probe: label count mismatch");
  }
  const std::set<int> classes(train_labels.begin(), train_labels.end());
  if (classes.size() < 2) throw ContractViolation("mlp_probe needs at least two classes");
  if (*classes.begin() < 0) throw ContractViolation("mlp_probe: negative label");
  const int num_classes =
      std::max(*classes.rbegin(),
               test_labels.empty() ? 0 : *std::max_element(test_labels.begin(), test_labels.end())) +
      1;

  Rng rng(derive_seed(seed, 0x9A0BE));
  const int hidden[] = {config.hidden};
  DenseNet net = DenseNet::mlp(static_cast<int>(train_emb.cols()), hidden, num_classes,
                               Activation::relu, Activation::identity);
  net.init_glorot(rng);
  AdamState adam(net.num_parameters(), AdamConfig{config.lr});

  const auto n = static_cast<std::size_t>(train_emb.rows());
  const auto bs = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> epoch_blocks;
  std::size_t block = 0;
  std::uint64_t epoch = 0;
  ForwardTape tape;
  for (long step = 0; step < config.steps; ++step) {
    if (block >= epoch_blocks.size()) {
      epoch_blocks = batches(all, bs, seed, epoch++, true);
      block = 0;
    }
    const auto& idx = epoch_blocks[block++];
    Matrix x(static_cast<Eigen::Index>(idx.size()), train_emb.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = train_emb.row(static_cast<Eigen::Index>(idx[r]));
    }
    const Matrix logits = forward(net, x, &tape);
    Matrix grad(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double m = logits.row(r).maxCoeff();
      const Eigen::RowVectorXd e = (logits.row(r).array() - m).exp();
      grad.row(r) = e / e.sum();
      grad(r, train_labels[idx[static_cast<std::size_t>(r)]]) -= 1.0;
    }
    grad /= static_cast<double>(idx.size());
    adam.step(net.parameters(), backward(net, tape, grad).params, 1.0);
  }

  const Matrix logits = forward(net, test_emb);
  std::vector<int> pred;
  pred.reserve(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    pred.push_back(static_cast<int>(arg));
  }
  return accuracy(pred, test_labels);
}

}  // namespace cmim
