#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dmgae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Undirected edge, stored with u < v.
struct Edge {
  int u = 0;
  int v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// G = (V, E, X) with optional integer class labels. Immutable after
// construction. Self-loops are dropped and duplicate or reversed edges are
// merged on construction; the counts are kept for reporting.
class AttributedGraph {
 public:
  AttributedGraph() = default;
  AttributedGraph(std::size_t n, std::vector<Edge> edges, Matrix features,
                  std::optional<std::vector<int>> labels = std::nullopt);

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& features() const { return features_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }

  // Sorted neighbor list of node i.
  const std::vector<int>& neighbors(int i) const { return adjacency_list_[i]; }
  bool has_edge(int u, int v) const;

  std::size_t dropped_self_loops() const { return dropped_self_loops_; }
  std::size_t dropped_duplicates() const { return dropped_duplicates_; }

  // Same topology and labels, different node features.
  AttributedGraph with_features(Matrix features) const;
  // Same nodes, features and labels, different edge set.
  AttributedGraph with_edges(std::vector<Edge> edges) const;

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  Matrix features_;
  std::optional<std::vector<int>> labels_;
  std::vector<std::vector<int>> adjacency_list_;
  std::size_t dropped_self_loops_ = 0;
  std::size_t dropped_duplicates_ = 0;
};

// Binary symmetric adjacency A with a_ij = 1 iff (v_i, v_j) in E.
class AdjacencyMatrix {
 public:
  explicit AdjacencyMatrix(SparseMatrix a) : a_(std::move(a)) {}
  const SparseMatrix& sparse() const { return a_; }
  Matrix dense() const { return Matrix(a_); }
  std::size_t size() const { return static_cast<std::size_t>(a_.rows()); }

 private:
  SparseMatrix a_;
};

// D^-1/2 (A + I) D^-1/2, the GCN propagation operator.
class NormalizedAdjacency {
 public:
  explicit NormalizedAdjacency(SparseMatrix a) : a_(std::move(a)) {}
  const SparseMatrix& sparse() const { return a_; }
  Matrix dense() const { return Matrix(a_); }
  std::size_t size() const { return static_cast<std::size_t>(a_.rows()); }

 private:
  SparseMatrix a_;
};

AdjacencyMatrix adjacency(const AttributedGraph& g);
NormalizedAdjacency normalize_adjacency(const AdjacencyMatrix& a);

// Undirected k-nearest-neighbor graph over the rows of x: (i, j) is an edge iff
// j is among the k nearest of i or i among the k nearest of j. Distance ties
// go to the lower node index.
AttributedGraph knn_graph(const Matrix& x, std::size_t k);

// Scales every feature row to unit L2 norm; zero rows are left unchanged.
Matrix row_normalize_l2(const Matrix& x);

// Canonical text formats: edges "u v" per line, features one row per line,
// labels one integer per line. Blank lines are ignored in the edge file.
AttributedGraph load_graph(const std::filesystem::path& edge_path,
                           const std::filesystem::path& feature_path,
                           const std::optional<std::filesystem::path>& label_path = std::nullopt);

void write_graph(const AttributedGraph& g, const std::filesystem::path& edge_path,
                 const std::filesystem::path& feature_path,
                 const std::optional<std::filesystem::path>& label_path = std::nullopt);

Matrix read_feature_file(const std::filesystem::path& path);
std::vector<int> read_label_file(const std::filesystem::path& path);

}  // namespace dmgae
