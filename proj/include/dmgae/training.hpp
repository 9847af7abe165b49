#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmgae/graph.hpp"
#include "dmgae/model.hpp"
#include "dmgae/objective.hpp"
#include "dmgae/similarity.hpp"

namespace dmgae {

enum class PriorGraph { given, knn };

struct TrainConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double nu_input = 100.0;
  double nu_latent = 1.0;
  double perplexity = 15.0;
  int k_samples = 5;
  int fc_layers = 1;
  int fc_hidden = 256;
  int gcn_hidden = 256;
  int latent_dim = 16;
  double lr = 0.001;
  int batch_size = 0;  // 0: min(n, 1024)
  int epochs = 400;
  std::uint64_t seed = 0;
  bool variational = true;
  // Disabling the structure loss leaves the plain (V)GAE objective.
  bool manifold = true;
  PriorGraph prior_graph = PriorGraph::given;
  int knn_k = 10;
  bool normalize_features = false;
  int checkpoint_every = 50;

  // Every violated constraint, empty when valid. n = 0 skips n-dependent checks.
  std::vector<std::string> validate(std::size_t n = 0) const;
  int resolved_batch_size(std::size_t n) const;
  ModelDims model_dims(int input_dim) const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// P(G_X) and P(G_bar_X) over the full input graph, computed once.
struct InputSimilarities {
  SimilarityResult prior;
  SimilarityResult complete;
  AttributedGraph prior_graph;
};

InputSimilarities precompute(const AttributedGraph& g, const TrainConfig& cfg);

// Pairwise quantities evaluated in the last batch; used to check that batch
// cost depends on K and the batch size only.
struct BatchOpCounts {
  std::size_t latent_pairs = 0;
  std::size_t decoded_pairs = 0;
  std::size_t input_pairs = 0;
};

struct BatchResult {
  LossReport report;
  ModelParams grads;
  BatchOpCounts ops;
};

class Trainer {
 public:
  Trainer(const AttributedGraph& g, TrainConfig cfg);

  // Idempotent: computes the input-space similarities on first use.
  const InputSimilarities& precompute();
  // Shares similarities computed elsewhere for the same graph and config.
  void set_input_similarities(std::shared_ptr<const InputSimilarities> sims);
  std::shared_ptr<const InputSimilarities> input_similarities() const { return sims_; }

  // Loss and gradients for one batch with explicit reparameterization noise
  // (one batch x latent_dim matrix per sample; ignored when not variational).
  BatchResult batch_loss(const ModelParams& params, std::span<const int> batch,
                         std::span<const Matrix> noise);

  LossReport train_epoch();

  const ModelParams& params() const { return params_; }
  void set_params(ModelParams params) { params_ = std::move(params); }
  const TrainConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }
  const BatchOpCounts& last_batch_ops() const { return last_ops_; }

  // Posterior mean over the full graph.
  Matrix embedding() const;
  EncoderOutput encode_all() const;
  Matrix feature_matrix() const { return features_.dense(); }

 private:
  std::vector<Matrix> draw_noise(std::size_t batch_rows);

  const AttributedGraph& graph_;
  TrainConfig cfg_;
  FeatureInput features_;
  NormalizedAdjacency a_norm_;
  ModelParams params_;
  AdamState adam_;
  int epoch_ = 0;
  std::mt19937_64 rng_;
  std::shared_ptr<const InputSimilarities> sims_;
  BatchOpCounts last_ops_;
};

struct FitResult {
  ModelParams params;
  Matrix embedding;
  std::vector<LossReport> history;
};

using EpochCallback = std::function<void(int epoch, const LossReport&, const Trainer&)>;

FitResult fit(const AttributedGraph& g, const TrainConfig& cfg,
              const EpochCallback& on_epoch = nullptr,
              std::shared_ptr<const InputSimilarities> sims = nullptr);

// Induced-subgraph 0/1 mask over `batch` (zero diagonal).
Matrix batch_edge_mask(const AttributedGraph& g, std::span<const int> batch);
Matrix gather_block(const Matrix& m, std::span<const int> batch);

}  // namespace dmgae
