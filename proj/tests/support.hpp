#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dmgae/graph.hpp"

namespace dmgae::test {

// Two-block stochastic block model with Gaussian features whose mean depends
// on the block.
inline AttributedGraph make_sbm(int n, double p_in, double p_out, std::uint64_t seed,
                                int feature_dim = 8, double mean_shift = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i < n / 2 ? 0 : 1;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? p_in : p_out;
      if (unit(rng) < p) edges.push_back({i, j});
    }
  }
  Matrix x(n, feature_dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < feature_dim; ++j) {
      x(i, j) = normal(rng) + (labels[static_cast<std::size_t>(i)] == 0 ? -mean_shift : mean_shift);
    }
  }
  return AttributedGraph(static_cast<std::size_t>(n), std::move(edges), std::move(x), labels);
}

// Six nodes, eight edges, three features.
inline AttributedGraph six_node_fixture() {
  Matrix x(6, 3);
  x << 0.2, -0.4, 1.0,
       0.9, 0.1, -0.3,
       -0.5, 0.7, 0.4,
       1.2, -0.8, 0.6,
       -0.1, 0.3, -0.9,
       0.6, 1.1, 0.2;
  std::vector<Edge> edges = {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 4}, {3, 4}, {3, 5}, {4, 5}};
  return AttributedGraph(6, std::move(edges), std::move(x), std::vector<int>{0, 0, 0, 1, 1, 1});
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dmgae_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace dmgae::test
