#include "dmgae/graph.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dmgae {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::ifstream open_for_reading(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open " + path.string());
  return in;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

AttributedGraph::AttributedGraph(std::size_t n, std::vector<Edge> edges, Matrix features,
                                 std::optional<std::vector<int>> labels)
    : n_(n), features_(std::move(features)), labels_(std::move(labels)) {
  if (static_cast<std::size_t>(features_.rows()) != n_) {
    throw GraphError("feature matrix has " + std::to_string(features_.rows()) +
                     " rows, expected " + std::to_string(n_));
  }
  if (labels_ && labels_->size() != n_) {
    throw GraphError("label vector has " + std::to_string(labels_->size()) +
                     " entries, expected " + std::to_string(n_));
  }
  const std::size_t raw_count = edges.size();
  std::vector<Edge> kept;
  kept.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n_ ||
        static_cast<std::size_t>(e.v) >= n_) {
      throw GraphError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                       ") references a node outside [0, " + std::to_string(n_) + ")");
    }
    if (e.u == e.v) {
      ++dropped_self_loops_;
      continue;
    }
    kept.push_back({std::min(e.u, e.v), std::max(e.u, e.v)});
  }
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  dropped_duplicates_ = raw_count - dropped_self_loops_ - kept.size();
  edges_ = std::move(kept);

  adjacency_list_.assign(n_, {});
  for (const Edge& e : edges_) {
    adjacency_list_[e.u].push_back(e.v);
    adjacency_list_[e.v].push_back(e.u);
  }
  for (auto& list : adjacency_list_) std::sort(list.begin(), list.end());
}

bool AttributedGraph::has_edge(int u, int v) const {
  if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n_ || static_cast<std::size_t>(v) >= n_) {
    return false;
  }
  const auto& list = adjacency_list_[u];
  return std::binary_search(list.begin(), list.end(), v);
}

AttributedGraph AttributedGraph::with_features(Matrix features) const {
  return AttributedGraph(n_, edges_, std::move(features), labels_);
}

AttributedGraph AttributedGraph::with_edges(std::vector<Edge> edges) const {
  return AttributedGraph(n_, std::move(edges), features_, labels_);
}

AdjacencyMatrix adjacency(const AttributedGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * g.num_edges());
  for (const Edge& e : g.edges()) {
    triplets.emplace_back(e.u, e.v, 1.0);
    triplets.emplace_back(e.v, e.u, 1.0);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return AdjacencyMatrix(std::move(a));
}

NormalizedAdjacency normalize_adjacency(const AdjacencyMatrix& adj) {
  const SparseMatrix& a = adj.sparse();
  const Eigen::Index n = a.rows();
  Vector degree = Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) degree[i] += it.value();
  }
  const Vector inv_sqrt = degree.array().rsqrt();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(a.nonZeros() + n));
  for (Eigen::Index i = 0; i < n; ++i) {
    triplets.emplace_back(i, i, inv_sqrt[i] * inv_sqrt[i]);
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      triplets.emplace_back(i, it.col(), it.value() * inv_sqrt[i] * inv_sqrt[it.col()]);
    }
  }
  SparseMatrix out(n, n);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return NormalizedAdjacency(std::move(out));
}

AttributedGraph knn_graph(const Matrix& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k >= n) {
    throw GraphError("k-NN graph needs k < n (k=" + std::to_string(k) +
                     ", n=" + std::to_string(n) + ")");
  }
  std::vector<Edge> edges;
  edges.reserve(n * k);
  std::vector<std::pair<double, int>> row(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      row[m++] = {(x.row(i) - x.row(j)).squaredNorm(), static_cast<int>(j)};
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
    for (std::size_t r = 0; r < k; ++r) edges.push_back({static_cast<int>(i), row[r].second});
  }
  return AttributedGraph(n, std::move(edges), x);
}

Matrix row_normalize_l2(const Matrix& x) {
  Matrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

Matrix read_feature_file(const std::filesystem::path& path) {
  auto in = open_for_reading(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<double> values;
    const char* p = line.c_str();
    char* end = nullptr;
    while (true) {
      while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
      if (*p == '\0') break;
      errno = 0;
      const double v = std::strtod(p, &end);
      if (end == p || errno == ERANGE || !std::isfinite(v)) {
        throw GraphError(where(path, line_no) + "malformed feature value");
      }
      values.push_back(v);
      p = end;
    }
    if (values.empty()) {
      if (is_blank(line) && in.peek() == EOF) break;
      throw GraphError(where(path, line_no) + "empty feature row");
    }
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw GraphError(where(path, line_no) + "expected " + std::to_string(rows.front().size()) +
                       " feature values, found " + std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  Matrix x(static_cast<Eigen::Index>(rows.size()),
           rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) x(i, j) = rows[i][j];
  }
  return x;
}

std::vector<int> read_label_file(const std::filesystem::path& path) {
  auto in = open_for_reading(path);
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    long value = 0;
    std::string extra;
    if (!(fields >> value) || (fields >> extra)) {
      if (is_blank(line) && in.peek() == EOF) break;
      throw GraphError(where(path, line_no) + "expected exactly one integer label");
    }
    labels.push_back(static_cast<int>(value));
  }
  return labels;
}

AttributedGraph load_graph(const std::filesystem::path& edge_path,
                           const std::filesystem::path& feature_path,
                           const std::optional<std::filesystem::path>& label_path) {
  Matrix features = read_feature_file(feature_path);
  const auto n = static_cast<std::size_t>(features.rows());

  auto in = open_for_reading(edge_path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    std::istringstream fields(line);
    long long u = -1;
    long long v = -1;
    std::string extra;
    if (!(fields >> u >> v) || (fields >> extra) || u < 0 || v < 0) {
      throw GraphError(where(edge_path, line_no) + "expected two non-negative node indices");
    }
    if (static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
      throw GraphError(where(edge_path, line_no) + "node index out of range [0, " +
                       std::to_string(n) + ")");
    }
    edges.push_back({static_cast<int>(u), static_cast<int>(v)});
  }

  std::optional<std::vector<int>> labels;
  if (label_path) {
    labels = read_label_file(*label_path);
    if (labels->size() != n) {
      throw GraphError(label_path->string() + ": " + std::to_string(labels->size()) +
                       " labels for " + std::to_string(n) + " feature rows");
    }
  }
  return AttributedGraph(n, std::move(edges), std::move(features), std::move(labels));
}

void write_graph(const AttributedGraph& g, const std::filesystem::path& edge_path,
                 const std::filesystem::path& feature_path,
                 const std::optional<std::filesystem::path>& label_path) {
  {
    std::ofstream out(edge_path);
    if (!out) throw GraphError("cannot write " + edge_path.string());
    for (const Edge& e : g.edges()) out << e.u << ' ' << e.v << '\n';
  }
  {
    std::ofstream out(feature_path);
    if (!out) throw GraphError("cannot write " + feature_path.string());
    char buf[32];
    const Matrix& x = g.features();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", x(i, j));
        if (j > 0) out << ' ';
        out << buf;
      }
      out << '\n';
    }
  }
  if (label_path) {
    if (!g.labels()) throw GraphError("graph has no labels to write");
    std::ofstream out(*label_path);
    if (!out) throw GraphError("cannot write " + label_path->string());
    for (int label : *g.labels()) out << label << '\n';
  }
}

}  // namespace dmgae
