#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dmgae/graph.hpp"

namespace dmgae {

enum class GraphMode { prior, complete };
enum class Space { input, latent };

// Conditional and joint similarities are kept strictly below one so the
// symmetrization and the logistic loss stay well defined.
inline constexpr double kMaxProbability = 1.0 - 1e-7;

inline constexpr double kSigmaMin = 1e-10;
inline constexpr double kSigmaMax = 1e10;
inline constexpr int kCalibrationIterations = 64;
inline constexpr double kCalibrationTolerance = 1e-5;

// Pairwise distances on a graph. Non-adjacent pairs carry the marker value
// `large`, which is strictly greater than every finite entry.
struct DistanceMatrix {
  Matrix values;
  double large = 0.0;

  bool is_marked(Eigen::Index i, Eigen::Index j) const {
    return large > 0.0 && values(i, j) == large;
  }
  Eigen::Index size() const { return values.rows(); }
};

using SimilarityMatrix = Matrix;

struct KernelParams {
  double nu = 1.0;
  Vector sigma;
  Vector rho;
  double perplexity = 15.0;
};

struct Calibration {
  double sigma = 1.0;
  bool flagged = false;
  int iterations = 0;
};

struct PreprocessedDistances {
  DistanceMatrix distances;
  Vector rho;
};

struct SimilarityResult {
  SimilarityMatrix p;
  KernelParams params;
  std::vector<bool> flagged;
};

// Counts calls into the calibration step, for tests and diagnostics.
struct PipelineStats {
  std::size_t calibrations = 0;
};

// Lanczos approximation (g = 7, 9 coefficients) of ln Gamma(x) for x > 0.
double log_gamma(double x);

// sqrt(2 pi) Gamma((nu+1)/2) / (sqrt(nu pi) Gamma(nu/2)).
double kernel_coefficient(double nu);

// C_nu (1 + d / (sigma nu))^(-(nu+1)/2); negative d is clamped to 0.
double t_kernel(double d, double sigma, double nu);
double t_kernel(double d, double sigma, double nu, double coefficient);

DistanceMatrix geodesic_distances(const AttributedGraph& g, const Matrix& embedding,
                                  GraphMode mode);

// Subtracts from each row the smallest off-diagonal unmarked entry. Marked
// entries and rows without any unmarked entry are left as they are.
PreprocessedDistances preprocess_distances(const DistanceMatrix& d);

// Bisection in log sigma over [kSigmaMin, kSigmaMax] so that the kernel mass
// over `row` matches log2(perplexity). `row` holds only the finite
// (unmarked, off-diagonal) preprocessed distances of one node. A target that
// cannot be met is flagged and sigma is pinned to the nearer range end.
Calibration calibrate_sigma(std::span<const double> row, double nu, double perplexity);

// p_{i|j} for every pair, clamped to [0, kMaxProbability]. Marked pairs and
// the diagonal get 0.
Matrix conditional_similarities(const DistanceMatrix& preprocessed, const Vector& sigma,
                                double nu);

// p_ij = p_{i|j} + p_{j|i} - 2 p_{i|j} p_{j|i}, zero diagonal.
SimilarityMatrix symmetrize(const Matrix& p_cond);

// Distances -> preprocessing -> calibrated kernel -> symmetrization. In the
// latent space the bandwidths are fixed to 1 and offsets to 0.
SimilarityResult similarity_pipeline(const AttributedGraph& g, const Matrix& embedding,
                                     GraphMode mode, double nu, double perplexity, Space space,
                                     PipelineStats* stats = nullptr);

}  // namespace dmgae
