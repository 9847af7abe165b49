#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dmgae/graph.hpp"

namespace dmgae {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KMeansResult {
  std::vector<int> labels;
  Matrix centroids;
  double inertia = 0.0;
};

inline constexpr int kKMeansRestarts = 20;
inline constexpr int kKMeansMaxIterations = 300;

// Lloyd's algorithm from k-means++ seeds, best inertia over `restarts` runs.
KMeansResult kmeans(const Matrix& points, int clusters, std::uint64_t seed,
                    int restarts = kKMeansRestarts);

// Minimum-cost assignment on a square cost matrix; result[row] = column.
std::vector<int> hungarian(const Matrix& cost);

struct ClusteringResult {
  std::vector<int> predicted;
  double acc = 0.0;
  double nmi = 0.0;
  double f1 = 0.0;
};

// ACC and macro F1 after the optimal one-to-one cluster/class matching, NMI
// with arithmetic-mean normalization.
ClusteringResult clustering_metrics(std::span<const int> predicted, std::span<const int> truth);
double normalized_mutual_information(std::span<const int> a, std::span<const int> b);

struct EdgeSplit {
  std::vector<Edge> train;
  std::vector<Edge> val_pos;
  std::vector<Edge> val_neg;
  std::vector<Edge> test_pos;
  std::vector<Edge> test_neg;
};

// Hides random edges as validation/test positives and samples as many
// distinct non-edges as negatives for each split.
EdgeSplit split_edges(const AttributedGraph& g, double val_frac, double test_frac,
                      std::uint64_t seed);

struct LinkPredictionResult {
  double auc = 0.0;
  double ap = 0.0;
};

// Mann-Whitney AUC with midranks for ties.
double roc_auc(std::span<const double> positive, std::span<const double> negative);
// Step-interpolated area under the precision-recall curve.
double average_precision(std::span<const double> positive, std::span<const double> negative);

std::vector<double> edge_scores(const Matrix& z, std::span<const Edge> pairs);
LinkPredictionResult link_prediction_metrics(const Matrix& z, std::span<const Edge> positive,
                                             std::span<const Edge> negative);
inline LinkPredictionResult link_prediction_metrics(const Matrix& z, const EdgeSplit& split) {
  return link_prediction_metrics(z, split.test_pos, split.test_neg);
}

}  // namespace dmgae
