#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmgae/autograd.hpp"
#include "dmgae/graph.hpp"

namespace dmgae {

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 10.0;

struct ModelDims {
  int input_dim = 0;
  std::vector<int> fc_hidden = {256};  // one entry per FC layer
  int gcn_hidden = 256;
  int latent_dim = 16;
};

// FC stack X -> X', then the two-layer GCN with a shared first layer and two
// heads (mean, log standard deviation). Biases are 1 x h rows.
struct ModelParams {
  std::vector<Matrix> fc_weights;
  std::vector<Matrix> fc_biases;
  Matrix gcn_shared;
  Matrix gcn_mu;
  Matrix gcn_logstd;

  // Glorot-uniform weights, zero biases.
  static ModelParams glorot(const ModelDims& dims, std::uint64_t seed);
  // Same shapes, all zero.
  ModelParams zeros_like() const;

  std::vector<std::pair<std::string, Matrix*>> named_tensors();
  std::vector<std::pair<std::string, const Matrix*>> named_tensors() const;

  ModelDims dims() const;
  bool all_finite() const;
  std::size_t parameter_count() const;
};

struct EncoderOutput {
  Matrix mu;
  Matrix log_std;
};

struct LatentSample {
  Matrix z;
  Matrix epsilon;
};

// Node features as fed to the first FC layer. Sparse storage is used when
// the matrix is mostly zeros (bag-of-words citation features).
class FeatureInput {
 public:
  explicit FeatureInput(const Matrix& x, double sparse_density_threshold = 0.1);
  const Matrix& dense() const { return dense_; }
  const std::optional<SparseMatrix>& sparse() const { return sparse_; }
  Eigen::Index rows() const { return dense_.rows(); }
  Eigen::Index cols() const { return dense_.cols(); }

 private:
  Matrix dense_;
  std::optional<SparseMatrix> sparse_;
};

Matrix fc_forward(const Matrix& x, const ModelParams& params);
EncoderOutput encode(const Matrix& x_prime, const NormalizedAdjacency& a_norm,
                     const ModelParams& params);
std::vector<LatentSample> sample_latent(const EncoderOutput& enc, int k, std::uint64_t seed,
                                        bool variational);
Matrix decode(const Matrix& z);

// Tape-side counterparts used for training.
struct ParamVars {
  std::vector<ad::Var> fc_weights;
  std::vector<ad::Var> fc_biases;
  ad::Var gcn_shared;
  ad::Var gcn_mu;
  ad::Var gcn_logstd;

  static ParamVars bind(ad::Tape& tape, const ModelParams& params);
  // Collects the gradients recorded for every bound tensor.
  ModelParams gradients(const ad::Tape& tape) const;
};

struct EncoderVars {
  ad::Var mu;
  ad::Var log_std;
};

ad::Var fc_forward(ad::Tape& tape, const FeatureInput& x, const ParamVars& params);
EncoderVars encode(ad::Var x_prime, const NormalizedAdjacency& a_norm, const ParamVars& params);

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

// Checkpoint bundle: <dir>/manifest.json plus one row-major TSV per tensor.
void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace dmgae
