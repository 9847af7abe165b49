#include "dmgae/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace dmgae {

namespace {

// Maps arbitrary integer labels onto 0..k-1 in increasing label order.
std::vector<int> compact(std::span<const int> labels, int* count) {
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [label, id] : ids) id = next++;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(ids[l]);
  *count = next;
  return out;
}

Matrix contingency(const std::vector<int>& a, int ka, const std::vector<int>& b, int kb) {
  Matrix table = Matrix::Zero(ka, kb);
  for (std::size_t i = 0; i < a.size(); ++i) table(a[i], b[i]) += 1.0;
  return table;
}

double entropy(const Vector& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0.0) h -= counts[i] / n * std::log(counts[i] / n);
  }
  return h;
}

struct LloydRun {
  std::vector<int> labels;
  Matrix centroids;
  double inertia = 0.0;
};

LloydRun lloyd(const Matrix& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Matrix centroids(k, x.cols());

  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centroids.row(0) = x.row(first(rng));
  Vector closest(n);
  for (Eigen::Index i = 0; i < n; ++i) closest[i] = (x.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = closest.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        r -= closest[pick];
        if (r < 0.0) break;
      }
      // Never land on a zero-weight point through rounding.
      while (closest[pick] <= 0.0 && pick > 0) --pick;
    } else {
      pick = first(rng);
    }
    centroids.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], (x.row(i) - centroids.row(c)).squaredNorm());
    }
  }

  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), -1);
  Vector dist(n);
  for (int iter = 0; iter < kKMeansMaxIterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist[i] = best_d;
      if (run.labels[static_cast<std::size_t>(i)] != best) {
        run.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(run.labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++sizes[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / sizes[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      Eigen::Index far = 0;
      dist.maxCoeff(&far);
      centroids.row(c) = x.row(far);
      dist[far] = 0.0;
      run.labels[static_cast<std::size_t>(far)] = c;
    }
  }

  run.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    run.inertia += (x.row(i) - centroids.row(run.labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  run.centroids = std::move(centroids);
  return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int clusters, std::uint64_t seed, int restarts) {
  if (clusters < 1 || clusters > points.rows()) {
    throw EvaluationError("k-means needs 1 <= clusters <= number of points");
  }
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    LloydRun run = lloyd(points, clusters, rng);
    if (run.inertia < best.inertia) {
      best.inertia = run.inertia;
      best.labels = std::move(run.labels);
      best.centroids = std::move(run.centroids);
    }
  }
  return best;
}

std::vector<int> hungarian(const Matrix& cost) {
  // Shortest augmenting path with potentials, 1-based internally.
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != cost.rows()) throw EvaluationError("hungarian needs a square matrix");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] != 0) assignment[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  }
  return assignment;
}

double normalized_mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty()) throw EvaluationError("NMI needs equal, non-empty inputs");
  int ka = 0;
  int kb = 0;
  const auto ca = compact(a, &ka);
  const auto cb = compact(b, &kb);
  const Matrix table = contingency(ca, ka, cb, kb);
  const auto n = static_cast<double>(a.size());
  const Vector rows = table.rowwise().sum();
  const Vector cols = table.colwise().sum().transpose();
  const double ha = entropy(rows, n);
  const double hb = entropy(cols, n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      const double nij = table(i, j);
      if (nij > 0.0) mi += nij / n * std::log(n * nij / (rows[i] * cols[j]));
    }
  }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

ClusteringResult clustering_metrics(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw EvaluationError("clustering metrics need equal, non-empty label vectors");
  }
  int clusters = 0;
  int classes = 0;
  const auto pred = compact(predicted, &clusters);
  const auto real = compact(truth, &classes);
  const Matrix table = contingency(pred, clusters, real, classes);

  const int m = std::max(clusters, classes);
  Matrix cost = Matrix::Zero(m, m);
  cost.topLeftCorner(clusters, classes) = -table;
  const std::vector<int> match = hungarian(cost);

  ClusteringResult result;
  result.predicted.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int cls = match[static_cast<std::size_t>(pred[i])];
    result.predicted[i] = cls < classes ? cls : -1;
  }

  std::size_t correct = 0;
  std::vector<double> tp(static_cast<std::size_t>(classes), 0.0);
  std::vector<double> fp(static_cast<std::size_t>(classes), 0.0);
  std::vector<double> fn(static_cast<std::size_t>(classes), 0.0);
  for (std::size_t i = 0; i < real.size(); ++i) {
    const int p = result.predicted[i];
    const int t = real[i];
    if (p == t) {
      ++correct;
      tp[static_cast<std::size_t>(t)] += 1.0;
    } else {
      fn[static_cast<std::size_t>(t)] += 1.0;
      if (p >= 0) fp[static_cast<std::size_t>(p)] += 1.0;
    }
  }
  double f1_sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    const auto k = static_cast<std::size_t>(c);
    const double denom = 2.0 * tp[k] + fp[k] + fn[k];
    f1_sum += denom > 0.0 ? 2.0 * tp[k] / denom : 0.0;
  }
  result.acc = static_cast<double>(correct) / static_cast<double>(real.size());
  result.f1 = f1_sum / classes;
  result.nmi = normalized_mutual_information(predicted, truth);
  // Report predictions in the caller's label space.
  std::map<int, int> original;
  for (std::size_t i = 0; i < real.size(); ++i) original[real[i]] = truth[i];
  for (int& p : result.predicted) {
    if (p >= 0) p = original[p];
  }
  return result;
}

EdgeSplit split_edges(const AttributedGraph& g, double val_frac, double test_frac,
                      std::uint64_t seed) {
  if (val_frac < 0.0 || test_frac < 0.0 || val_frac + test_frac >= 1.0) {
    throw EvaluationError("split fractions must be non-negative and sum below 1");
  }
  const std::size_t m = g.num_edges();
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(m) * test_frac));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(m) * val_frac));
  if (n_test == 0 && test_frac > 0.0) throw EvaluationError("too few edges for a test split");

  const auto n = static_cast<std::uint64_t>(g.num_nodes());
  const std::uint64_t pairs = n * (n - 1) / 2;
  const std::size_t negatives_needed = n_test + n_val;
  if (pairs - m < negatives_needed) {
    throw EvaluationError("graph has " + std::to_string(pairs - m) + " non-edges but " +
                          std::to_string(negatives_needed) + " negative pairs are required");
  }

  std::mt19937_64 rng(seed);
  std::vector<Edge> edges = g.edges();
  std::shuffle(edges.begin(), edges.end(), rng);
  EdgeSplit split;
  split.test_pos.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.val_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test),
                       edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  split.train.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), edges.end());
  std::sort(split.train.begin(), split.train.end());

  std::vector<Edge> negatives;
  negatives.reserve(negatives_needed);
  if (2 * negatives_needed > pairs - m) {
    // Dense graph: enumerate every non-edge and take a random prefix.
    std::vector<Edge> all;
    for (int u = 0; u < static_cast<int>(n); ++u) {
      for (int v = u + 1; v < static_cast<int>(n); ++v) {
        if (!g.has_edge(u, v)) all.push_back({u, v});
      }
    }
    std::shuffle(all.begin(), all.end(), rng);
    negatives.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(negatives_needed));
  } else {
    std::set<Edge> seen;
    std::uniform_int_distribution<int> node(0, static_cast<int>(n) - 1);
    while (negatives.size() < negatives_needed) {
      const int a = node(rng);
      const int b = node(rng);
      if (a == b) continue;
      const Edge e{std::min(a, b), std::max(a, b)};
      if (g.has_edge(e.u, e.v) || !seen.insert(e).second) continue;
      negatives.push_back(e);
    }
  }
  split.test_neg.assign(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.val_neg.assign(negatives.begin() + static_cast<std::ptrdiff_t>(n_test), negatives.end());
  return split;
}

double roc_auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw EvaluationError("AUC needs both classes");
  std::vector<std::pair<double, bool>> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.emplace_back(s, true);
  for (double s : negative) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].second) positive_rank_sum += midrank;
    }
    i = j;
  }
  const auto np = static_cast<double>(positive.size());
  const auto nn = static_cast<double>(negative.size());
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double average_precision(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty()) throw EvaluationError("average precision needs positives");
  std::vector<std::pair<double, bool>> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.emplace_back(s, true);
  for (double s : negative) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  const auto total_pos = static_cast<double>(positive.size());
  double tp = 0.0;
  double fp = 0.0;
  double prev_recall = 0.0;
  double ap = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

std::vector<double> edge_scores(const Matrix& z, std::span<const Edge> pairs) {
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const Edge& e : pairs) {
    const double logit = z.row(e.u).dot(z.row(e.v));
    scores.push_back(1.0 / (1.0 + std::exp(-logit)));
  }
  return scores;
}

LinkPredictionResult link_prediction_metrics(const Matrix& z, std::span<const Edge> positive,
                                             std::span<const Edge> negative) {
  const auto pos = edge_scores(z, positive);
  const auto neg = edge_scores(z, negative);
  return {roc_auc(pos, neg), average_precision(pos, neg)};
}

}  // namespace dmgae
