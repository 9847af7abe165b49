#include "doctest.h"

#include <random>
#include <set>

#include "dmgae/evaluation.hpp"
#include "support.hpp"

using namespace dmgae;

namespace {

double brute_force_auc(std::span<const double> pos, std::span<const double> neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(pos.size() * neg.size());
}

double inertia_of(const Matrix& x, const std::vector<int>& labels, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(x.cols());
    int count = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (labels[static_cast<std::size_t>(i)] == c) {
        mean += x.row(i);
        ++count;
      }
    }
    if (count == 0) return INFINITY;
    mean /= count;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (labels[static_cast<std::size_t>(i)] == c) total += (x.row(i) - mean).squaredNorm();
    }
  }
  return total;
}

// Exhaustive minimum over every assignment of points to k nonempty clusters.
double best_partition_inertia(const Matrix& x, int k) {
  const auto n = static_cast<int>(x.rows());
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  double best = INFINITY;
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(k);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = static_cast<int>(c % static_cast<std::size_t>(k));
      c /= static_cast<std::size_t>(k);
    }
    if (labels[0] != 0) continue;  // symmetry: first point in cluster 0
    best = std::min(best, inertia_of(x, labels, k));
  }
  return best;
}

}  // namespace

TEST_CASE("k-means recovers separated clouds") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 0.1);
  Matrix x(60, 2);
  for (int i = 0; i < 60; ++i) {
    x(i, 0) = normal(rng) + (i < 30 ? 0.0 : 10.0);
    x(i, 1) = normal(rng);
  }
  const auto r = kmeans(x, 2, 1);
  std::vector<int> truth(60);
  for (int i = 0; i < 60; ++i) truth[static_cast<std::size_t>(i)] = i < 30 ? 0 : 1;
  CHECK(clustering_metrics(r.labels, truth).acc == 1.0);
  CHECK(kmeans(x, 2, 1).labels == r.labels);
}

TEST_CASE("k-means with one cluster per point") {
  Matrix x(5, 2);
  x << 0, 0, 1, 0, 0, 1, 5, 5, 2, 3;
  const auto r = kmeans(x, 5, 0);
  CHECK(r.inertia == doctest::Approx(0.0));
  CHECK(std::set<int>(r.labels.begin(), r.labels.end()).size() == 5);
  CHECK_THROWS_AS(kmeans(x, 6, 0), EvaluationError);
}

TEST_CASE("k-means matches the exhaustive optimum on 12 planar points") {
  Matrix x(12, 2);
  x << 0.0, 0.0, 0.4, 0.3, -0.2, 0.5, 0.1, -0.4,
       3.0, 3.1, 3.5, 2.6, 2.7, 3.4, 3.3, 3.6,
       6.1, -0.5, 5.6, 0.2, 6.4, 0.4, 1.8, 1.5;
  const double oracle = best_partition_inertia(x, 3);
  const auto r = kmeans(x, 3, 4);
  CHECK(r.inertia == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(inertia_of(x, r.labels, 3) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("hungarian assignment") {
  Matrix cost(3, 3);
  cost << 4, 1, 3,
          2, 0, 5,
          3, 2, 2;
  const auto a = hungarian(cost);
  double total = 0.0;
  for (int i = 0; i < 3; ++i) total += cost(i, a[static_cast<std::size_t>(i)]);
  CHECK(total == 5.0);
  CHECK(std::set<int>(a.begin(), a.end()).size() == 3);
}

TEST_CASE("clustering metrics on a hand-checked fixture") {
  const std::vector<int> truth = {0, 0, 0, 1, 1, 1, 2, 2, 2, 2};
  const std::vector<int> pred = {2, 2, 1, 0, 0, 0, 1, 1, 1, 0};
  const auto r = clustering_metrics(pred, truth);
  CHECK(r.acc == doctest::Approx(0.8));
  CHECK(r.nmi == doctest::Approx(0.59616182041946852).epsilon(1e-12));
  CHECK(r.f1 == doctest::Approx(0.80238095238095231).epsilon(1e-12));
  CHECK(r.predicted == std::vector<int>{0, 0, 2, 1, 1, 1, 2, 2, 2, 1});

  // One misassigned element out of six.
  const std::vector<int> t6 = {0, 0, 0, 1, 1, 1};
  const std::vector<int> p6 = {1, 1, 0, 0, 0, 0};
  const auto r6 = clustering_metrics(p6, t6);
  CHECK(r6.acc == doctest::Approx(5.0 / 6.0));
  // Pairwise-counted mutual information: joint {2, 1, 3}/6.
  const double h_t = std::log(2.0);
  const double h_p = -(2.0 / 6.0) * std::log(2.0 / 6.0) - (4.0 / 6.0) * std::log(4.0 / 6.0);
  const double mi = (2.0 / 6.0) * std::log((2.0 / 6.0) / (0.5 * 2.0 / 6.0)) +
                    (1.0 / 6.0) * std::log((1.0 / 6.0) / (0.5 * 4.0 / 6.0)) +
                    (3.0 / 6.0) * std::log((3.0 / 6.0) / (0.5 * 4.0 / 6.0));
  CHECK(r6.nmi == doctest::Approx(mi / (0.5 * (h_t + h_p))).epsilon(1e-12));
}

TEST_CASE("clustering metrics are invariant to relabeling") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> cls(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Mostly-correct predictions keep the optimal matching unique; F1 follows
  // the matching, so it is only relabeling-invariant without ties.
  for (int t = 0; t < 50; ++t) {
    std::vector<int> truth(30);
    std::vector<int> pred(30);
    for (int i = 0; i < 30; ++i) {
      truth[static_cast<std::size_t>(i)] = i % 4;
      pred[static_cast<std::size_t>(i)] = unit(rng) < 0.8 ? (i % 4 + 1) % 4 : cls(rng);
    }
    std::vector<int> perm = {2, 0, 3, 1};
    std::vector<int> relabeled(30);
    for (int i = 0; i < 30; ++i) relabeled[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(pred[static_cast<std::size_t>(i)])] + 10;
    const auto a = clustering_metrics(pred, truth);
    const auto b = clustering_metrics(relabeled, truth);
    REQUIRE(a.acc == doctest::Approx(b.acc));
    REQUIRE(a.nmi == doctest::Approx(b.nmi));
    REQUIRE(a.f1 == doctest::Approx(b.f1));
    REQUIRE(normalized_mutual_information(pred, truth) == doctest::Approx(normalized_mutual_information(truth, pred)));
  }
  const std::vector<int> same = {3, 1, 1, 7, 3};
  const auto r = clustering_metrics(same, same);
  CHECK(r.acc == 1.0);
  CHECK(r.nmi == doctest::Approx(1.0));
  CHECK(r.f1 == doctest::Approx(1.0));
}

TEST_CASE("ranking metrics") {
  const std::vector<double> pos = {0.9, 0.8, 0.8, 0.55, 0.3, 0.7, 0.62};
  const std::vector<double> neg = {0.8, 0.4, 0.55, 0.1, 0.3, 0.2};
  CHECK(roc_auc(pos, neg) == doctest::Approx(0.80952380952380953).epsilon(1e-12));
  CHECK(roc_auc(pos, neg) == doctest::Approx(brute_force_auc(pos, neg)).epsilon(1e-12));
  CHECK(average_precision(pos, neg) == doctest::Approx(0.78852813852813863).epsilon(1e-12));

  const std::vector<double> hi = {2.0, 3.0};
  const std::vector<double> lo = {0.0, 1.0, 1.5};
  CHECK(roc_auc(hi, lo) == 1.0);
  CHECK(average_precision(hi, lo) == 1.0);
  const std::vector<double> flat(4, 0.5);
  CHECK(roc_auc(flat, flat) == 0.5);

  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> level(0, 9);
  for (int t = 0; t < 200; ++t) {
    const int np = 1 + t % 14;
    const int nn = 1 + (t * 7) % 14;
    std::vector<double> p(static_cast<std::size_t>(np));
    std::vector<double> n(static_cast<std::size_t>(nn));
    for (double& v : p) v = level(rng) / 10.0;
    for (double& v : n) v = level(rng) / 10.0;
    REQUIRE(roc_auc(p, n) == doctest::Approx(brute_force_auc(p, n)).epsilon(1e-12));
  }
}

TEST_CASE("edge split") {
  const auto g = test::make_sbm(60, 0.25, 0.05, 5);
  const auto s = split_edges(g, 0.05, 0.10, 3);
  const auto m = g.num_edges();
  CHECK(s.val_pos.size() == static_cast<std::size_t>(std::floor(0.05 * static_cast<double>(m))));
  CHECK(s.test_pos.size() == static_cast<std::size_t>(std::floor(0.10 * static_cast<double>(m))));
  CHECK(s.val_neg.size() == s.val_pos.size());
  CHECK(s.test_neg.size() == s.test_pos.size());
  std::set<Edge> all(s.train.begin(), s.train.end());
  for (const auto& e : s.val_pos) CHECK(all.insert(e).second);
  for (const auto& e : s.test_pos) CHECK(all.insert(e).second);
  CHECK(std::vector<Edge>(all.begin(), all.end()) == g.edges());
  std::set<Edge> negatives;
  for (const auto* list : {&s.val_neg, &s.test_neg}) {
    for (const auto& e : *list) {
      CHECK_FALSE(g.has_edge(e.u, e.v));
      CHECK(e.u != e.v);
      CHECK(negatives.insert(e).second);
    }
  }
  const auto again = split_edges(g, 0.05, 0.10, 3);
  CHECK(again.test_pos == s.test_pos);
  CHECK(again.test_neg == s.test_neg);

  std::vector<Edge> full;
  for (int i = 0; i < 10; ++i) {
    for (int j = i + 1; j < 10; ++j) full.push_back({i, j});
  }
  AttributedGraph complete(10, full, Matrix::Zero(10, 1));
  CHECK_THROWS_AS(split_edges(complete, 0.05, 0.10, 1), EvaluationError);
}

TEST_CASE("edge split counts on a 100-edge graph") {
  std::vector<Edge> edges;
  for (int i = 0; i < 100; ++i) edges.push_back({i, i + 1});
  AttributedGraph path(101, edges, Matrix::Zero(101, 1));
  const auto s = split_edges(path, 0.05, 0.10, 0);
  CHECK(s.val_pos.size() == 5);
  CHECK(s.test_pos.size() == 10);
  CHECK(s.val_neg.size() == 5);
  CHECK(s.test_neg.size() == 10);
  CHECK(s.train.size() == 85);
}

TEST_CASE("link prediction scores decode inner products") {
  Matrix z(4, 2);
  z << 1, 0, 1, 0.1, -1, 0, 0, 1;
  const std::vector<Edge> pos = {{0, 1}};
  const std::vector<Edge> neg = {{0, 2}, {2, 3}};
  const auto scores = edge_scores(z, pos);
  CHECK(scores[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  const auto r = link_prediction_metrics(z, pos, neg);
  CHECK(r.auc == 1.0);
  CHECK(r.ap == 1.0);
}
