#include "dmgae/similarity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace dmgae {

namespace {

constexpr double kLargeFactor = 1e6;

constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

}  // namespace

double log_gamma(double x) {
  if (x < 0.5) {
    // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x).
    return std::log(std::numbers::pi / std::abs(std::sin(std::numbers::pi * x))) -
           log_gamma(1.0 - x);
  }
  x -= 1.0;
  double a = kLanczos[0];
  const double t = x + 7.5;
  for (std::size_t i = 1; i < kLanczos.size(); ++i) a += kLanczos[i] / (x + static_cast<double>(i));
  return 0.5 * std::log(2.0 * std::numbers::pi) + (x + 0.5) * std::log(t) - t + std::log(a);
}

double kernel_coefficient(double nu) {
  const double log_c = 0.5 * std::log(2.0 * std::numbers::pi) + log_gamma(0.5 * (nu + 1.0)) -
                       0.5 * std::log(nu * std::numbers::pi) - log_gamma(0.5 * nu);
  return std::exp(log_c);
}

double t_kernel(double d, double sigma, double nu, double coefficient) {
  d = std::max(d, 0.0);
  return coefficient * std::pow(1.0 + d / (sigma * nu), -0.5 * (nu + 1.0));
}

double t_kernel(double d, double sigma, double nu) {
  return t_kernel(d, sigma, nu, kernel_coefficient(nu));
}

DistanceMatrix geodesic_distances(const AttributedGraph& g, const Matrix& embedding,
                                  GraphMode mode) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  if (embedding.rows() != n) {
    throw GraphError("embedding has " + std::to_string(embedding.rows()) + " rows for " +
                     std::to_string(n) + " nodes");
  }
  DistanceMatrix out;
  if (mode == GraphMode::complete) {
    out.values = Matrix::Zero(n, n);
    // Column per node so each difference reads contiguous memory.
    const Matrix points = embedding.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double d = (points.col(i) - points.col(j)).norm();
        out.values(i, j) = d;
        out.values(j, i) = d;
      }
    }
    return out;
  }

  double max_finite = 0.0;
  std::vector<double> edge_distance(g.num_edges());
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const Edge& edge = g.edges()[e];
    edge_distance[e] = (embedding.row(edge.u) - embedding.row(edge.v)).norm();
    max_finite = std::max(max_finite, edge_distance[e]);
  }
  out.large = kLargeFactor * (max_finite > 0.0 ? max_finite : 1.0);
  out.values = Matrix::Constant(n, n, out.large);
  out.values.diagonal().setZero();
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const Edge& edge = g.edges()[e];
    out.values(edge.u, edge.v) = edge_distance[e];
    out.values(edge.v, edge.u) = edge_distance[e];
  }
  return out;
}

PreprocessedDistances preprocess_distances(const DistanceMatrix& d) {
  const Eigen::Index n = d.size();
  PreprocessedDistances out{d, Vector::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    double rho = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && !d.is_marked(i, j)) rho = std::min(rho, d.values(i, j));
    }
    if (!std::isfinite(rho)) continue;
    out.rho[i] = rho;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && !d.is_marked(i, j)) {
        out.distances.values(i, j) = std::max(0.0, d.values(i, j) - rho);
      }
    }
  }
  return out;
}

Calibration calibrate_sigma(std::span<const double> row, double nu, double perplexity) {
  const double target = std::log2(perplexity);
  const double coefficient = kernel_coefficient(nu);
  const auto mass = [&](double sigma) {
    double sum = 0.0;
    for (double d : row) sum += t_kernel(d, sigma, nu, coefficient);
    return sum;
  };

  double lo = std::log(kSigmaMin);
  double hi = std::log(kSigmaMax);
  Calibration result;
  double sum = 0.0;
  for (int it = 0; it < kCalibrationIterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    result.sigma = std::exp(mid);
    result.iterations = it + 1;
    sum = mass(result.sigma);
    if (std::abs(sum - target) <= kCalibrationTolerance) return result;
    // Mass grows with sigma.
    if (sum < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Unreachable: report the end of the range the search was pushed against.
  result.flagged = true;
  result.sigma = sum < target ? kSigmaMax : kSigmaMin;
  return result;
}

Matrix conditional_similarities(const DistanceMatrix& preprocessed, const Vector& sigma,
                                double nu) {
  const Eigen::Index n = preprocessed.size();
  const double coefficient = kernel_coefficient(nu);
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || preprocessed.is_marked(i, j)) continue;
      const double value = t_kernel(preprocessed.values(i, j), sigma[i], nu, coefficient);
      p(i, j) = std::clamp(value, 0.0, kMaxProbability);
    }
  }
  return p;
}

SimilarityMatrix symmetrize(const Matrix& p_cond) {
  const Eigen::Index n = p_cond.rows();
  SimilarityMatrix p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = p_cond(i, j);
      const double b = p_cond(j, i);
      const double value = std::clamp(a + b - 2.0 * a * b, 0.0, 1.0);
      p(i, j) = value;
      p(j, i) = value;
    }
  }
  return p;
}

SimilarityResult similarity_pipeline(const AttributedGraph& g, const Matrix& embedding,
                                     GraphMode mode, double nu, double perplexity, Space space,
                                     PipelineStats* stats) {
  const DistanceMatrix d = geodesic_distances(g, embedding, mode);
  const Eigen::Index n = d.size();
  SimilarityResult out;
  out.params.nu = nu;
  out.params.perplexity = perplexity;
  out.params.sigma = Vector::Ones(n);
  out.flagged.assign(static_cast<std::size_t>(n), false);

  if (space == Space::latent) {
    out.params.rho = Vector::Zero(n);
    out.p = symmetrize(conditional_similarities(d, out.params.sigma, nu));
    return out;
  }

  const PreprocessedDistances pre = preprocess_distances(d);
  out.params.rho = pre.rho;
  std::vector<double> row;
  row.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && !pre.distances.is_marked(i, j)) row.push_back(pre.distances.values(i, j));
    }
    if (row.empty()) {
      // Isolated in the prior graph: nothing to calibrate, every p_{i|j} is 0.
      out.flagged[static_cast<std::size_t>(i)] = true;
      continue;
    }
    const Calibration c = calibrate_sigma(row, nu, perplexity);
    if (stats) ++stats->calibrations;
    out.params.sigma[i] = c.sigma;
    out.flagged[static_cast<std::size_t>(i)] = c.flagged;
  }
  out.p = symmetrize(conditional_similarities(pre.distances, out.params.sigma, nu));
  return out;
}

}  // namespace dmgae
