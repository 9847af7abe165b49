#include "dmgae/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace dmgae {

namespace {

constexpr int kDefaultMaxBatch = 1024;

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

AttributedGraph prepared_graph(const AttributedGraph& g, const TrainConfig& cfg) {
  if (!cfg.normalize_features) return g;
  return g.with_features(row_normalize_l2(g.features()));
}

}  // namespace

std::vector<std::string> TrainConfig::validate(std::size_t n) const {
  std::vector<std::string> errors;
  const auto require = [&](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be a finite value >= 0");
  require(beta >= 0.0 && std::isfinite(beta), "beta must be a finite value >= 0");
  require(nu_input > 0.0 && std::isfinite(nu_input), "nu_input must be > 0");
  require(nu_latent > 0.0 && std::isfinite(nu_latent), "nu_latent must be > 0");
  require(perplexity > 1.0 && std::isfinite(perplexity), "perplexity must be > 1");
  require(k_samples >= 1, "k_samples must be >= 1");
  require(fc_layers >= 0, "fc_layers must be >= 0");
  require(fc_hidden >= 1, "fc_hidden must be >= 1");
  require(gcn_hidden >= 1, "gcn_hidden must be >= 1");
  require(latent_dim >= 1, "latent_dim must be >= 1");
  require(lr >= 0.0 && std::isfinite(lr), "lr must be a finite value >= 0");
  require(batch_size >= 0, "batch_size must be >= 0 (0 selects the default)");
  require(epochs >= 0, "epochs must be >= 0");
  require(knn_k >= 1, "knn_k must be >= 1");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  if (n > 0) {
    require(static_cast<std::size_t>(batch_size) <= n,
            "batch_size must not exceed the node count " + std::to_string(n));
    if (prior_graph == PriorGraph::knn) {
      require(static_cast<std::size_t>(knn_k) < n, "knn_k must be smaller than the node count");
    }
  }
  return errors;
}

int TrainConfig::resolved_batch_size(std::size_t n) const {
  if (batch_size > 0) return batch_size;
  return static_cast<int>(std::min<std::size_t>(n, kDefaultMaxBatch));
}

ModelDims TrainConfig::model_dims(int input_dim) const {
  ModelDims dims;
  dims.input_dim = input_dim;
  dims.fc_hidden.assign(static_cast<std::size_t>(fc_layers), fc_hidden);
  dims.gcn_hidden = gcn_hidden;
  dims.latent_dim = latent_dim;
  return dims;
}

InputSimilarities precompute(const AttributedGraph& g, const TrainConfig& cfg) {
  const AttributedGraph input = prepared_graph(g, cfg);
  AttributedGraph prior = cfg.prior_graph == PriorGraph::knn
                              ? input.with_edges(knn_graph(input.features(), cfg.knn_k).edges())
                              : input;
  InputSimilarities out{
      similarity_pipeline(prior, input.features(), GraphMode::prior, cfg.nu_input,
                          cfg.perplexity, Space::input),
      similarity_pipeline(input, input.features(), GraphMode::complete, cfg.nu_input,
                          cfg.perplexity, Space::input),
      std::move(prior)};
  return out;
}

Matrix batch_edge_mask(const AttributedGraph& g, std::span<const int> batch) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  Matrix mask = Matrix::Zero(b, b);
  std::unordered_map<int, Eigen::Index> position;
  position.reserve(batch.size());
  for (Eigen::Index r = 0; r < b; ++r) position.emplace(batch[static_cast<std::size_t>(r)], r);
  for (Eigen::Index r = 0; r < b; ++r) {
    for (int neighbor : g.neighbors(batch[static_cast<std::size_t>(r)])) {
      const auto it = position.find(neighbor);
      if (it != position.end()) mask(r, it->second) = 1.0;
    }
  }
  return mask;
}

Matrix gather_block(const Matrix& m, std::span<const int> batch) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  Matrix out(b, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    for (Eigen::Index i = 0; i < b; ++i) {
      out(i, j) = m(batch[static_cast<std::size_t>(i)], batch[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

Trainer::Trainer(const AttributedGraph& g, TrainConfig cfg)
    : graph_(g),
      cfg_(std::move(cfg)),
      features_(cfg_.normalize_features ? row_normalize_l2(g.features()) : g.features()),
      a_norm_(normalize_adjacency(adjacency(g))),
      rng_(make_stream(cfg_.seed, 1)) {
  const auto errors = cfg_.validate(g.num_nodes());
  if (!errors.empty()) {
    std::string message = "invalid training configuration:";
    for (const auto& e : errors) message += "\n  " + e;
    throw TrainingError(message);
  }
  params_ = ModelParams::glorot(cfg_.model_dims(static_cast<int>(g.features().cols())), cfg_.seed);
}

const InputSimilarities& Trainer::precompute() {
  if (!sims_) sims_ = std::make_shared<const InputSimilarities>(dmgae::precompute(graph_, cfg_));
  return *sims_;
}

void Trainer::set_input_similarities(std::shared_ptr<const InputSimilarities> sims) {
  if (sims && sims->prior.p.rows() != static_cast<Eigen::Index>(graph_.num_nodes())) {
    throw TrainingError("input similarities do not match the graph size");
  }
  sims_ = std::move(sims);
}

EncoderOutput Trainer::encode_all() const {
  return encode(fc_forward(features_.dense(), params_), a_norm_, params_);
}

Matrix Trainer::embedding() const { return encode_all().mu; }

std::vector<Matrix> Trainer::draw_noise(std::size_t batch_rows) {
  std::vector<Matrix> noise;
  if (!cfg_.variational) return noise;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < cfg_.k_samples; ++k) {
    Matrix eps(static_cast<Eigen::Index>(batch_rows), cfg_.latent_dim);
    for (Eigen::Index j = 0; j < eps.cols(); ++j) {
      for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = normal(rng_);
    }
    noise.push_back(std::move(eps));
  }
  return noise;
}

BatchResult Trainer::batch_loss(const ModelParams& params, std::span<const int> batch,
                                std::span<const Matrix> noise) {
  const InputSimilarities* sims = cfg_.manifold ? &precompute() : nullptr;
  const auto b = static_cast<Eigen::Index>(batch.size());
  if (cfg_.variational && noise.size() != static_cast<std::size_t>(cfg_.k_samples)) {
    throw TrainingError("expected one noise matrix per latent sample");
  }

  ad::Tape tape;
  const ParamVars vars = ParamVars::bind(tape, params);
  const EncoderVars enc = encode(fc_forward(tape, features_, vars), a_norm_, vars);
  const ad::Var mu = ad::gather_rows(enc.mu, batch);
  const ad::Var log_std = ad::gather_rows(enc.log_std, batch);

  const Matrix labels = batch_edge_mask(graph_, batch) + Matrix::Identity(b, b);
  Matrix prior_mask;
  Matrix p_prior;
  Matrix p_complete;
  BatchOpCounts ops;
  if (cfg_.manifold) {
    prior_mask = batch_edge_mask(sims->prior_graph, batch);
    p_prior = gather_block(sims->prior.p, batch);
    p_complete = gather_block(sims->complete.p, batch);
    ops.input_pairs = 2 * static_cast<std::size_t>(b * b);
  }

  // The non-variational path has K identical samples; one evaluation covers
  // the average.
  const int samples = cfg_.variational ? cfg_.k_samples : 1;
  std::vector<ad::Var> recon_terms;
  std::vector<ad::Var> prior_terms;
  std::vector<ad::Var> complete_terms;
  for (int k = 0; k < samples; ++k) {
    const ad::Var z = cfg_.variational
                          ? ad::add(mu, ad::mul_const(ad::exp(log_std), noise[static_cast<std::size_t>(k)]))
                          : mu;
    recon_terms.push_back(loss::recon(ad::matmul(z, ad::transpose(z)), labels));
    ops.decoded_pairs += static_cast<std::size_t>(b * b);
    if (cfg_.manifold) {
      const ad::Var p_latent = loss::latent_similarity(z, prior_mask, cfg_.nu_latent);
      prior_terms.push_back(loss::logistic(p_prior, p_latent));
      complete_terms.push_back(loss::logistic(p_complete, p_latent));
      ops.latent_pairs += static_cast<std::size_t>(b * b);
    }
  }

  const auto average = [&](const std::vector<ad::Var>& terms) {
    ad::Var acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
    return ad::scale(acc, 1.0 / static_cast<double>(terms.size()));
  };

  BatchResult result;
  LossReport& report = result.report;
  report.alpha = cfg_.alpha;
  report.beta = cfg_.beta;

  ad::Var reconstruction = average(recon_terms);
  report.recon = reconstruction.value()(0, 0);
  if (cfg_.variational) {
    const ad::Var kl = loss::kl(mu, log_std);
    report.kl = kl.value()(0, 0);
    reconstruction = ad::add(reconstruction, kl);
  }
  ad::Var total = ad::scale(reconstruction, cfg_.beta);
  if (cfg_.manifold) {
    const ad::Var prior = average(prior_terms);
    const ad::Var complete = average(complete_terms);
    report.manifold_prior = prior.value()(0, 0);
    report.manifold_complete = complete.value()(0, 0);
    total = ad::add(ad::add(prior, ad::scale(complete, cfg_.alpha)), total);
  }
  finalize(report);

  if (!std::isfinite(total.value()(0, 0))) {
    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch_));
  }
  tape.backward(total);
  result.grads = vars.gradients(tape);
  if (!result.grads.all_finite()) {
    throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch_));
  }
  result.ops = ops;
  return result;
}

LossReport Trainer::train_epoch() {
  if (cfg_.manifold) precompute();
  const std::size_t n = graph_.num_nodes();
  const auto batch_size = static_cast<std::size_t>(cfg_.resolved_batch_size(n));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  LossReport mean;
  mean.alpha = cfg_.alpha;
  mean.beta = cfg_.beta;
  double kl_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    const std::span<const int> batch(order.data() + start, stop - start);
    const std::vector<Matrix> noise = draw_noise(batch.size());
    const BatchResult r = batch_loss(params_, batch, noise);
    last_ops_ = r.ops;

    ModelParams updated = params_;
    adam_step(updated, r.grads, adam_, cfg_.lr);
    if (!updated.all_finite()) {
      throw TrainingError("non-finite parameters after update at epoch " + std::to_string(epoch_));
    }
    params_ = std::move(updated);

    mean.recon += r.report.recon;
    kl_sum += r.report.kl.value_or(0.0);
    mean.manifold_prior += r.report.manifold_prior;
    mean.manifold_complete += r.report.manifold_complete;
    ++batches;
  }
  if (batches > 0) {
    const double inv = 1.0 / static_cast<double>(batches);
    mean.recon *= inv;
    mean.manifold_prior *= inv;
    mean.manifold_complete *= inv;
    if (cfg_.variational) mean.kl = kl_sum * inv;
  }
  finalize(mean);
  ++epoch_;
  return mean;
}

FitResult fit(const AttributedGraph& g, const TrainConfig& cfg, const EpochCallback& on_epoch,
              std::shared_ptr<const InputSimilarities> sims) {
  Trainer trainer(g, cfg);
  if (sims) trainer.set_input_similarities(std::move(sims));
  if (cfg.manifold) trainer.precompute();
  FitResult result;
  for (int e = 0; e < cfg.epochs; ++e) {
    result.history.push_back(trainer.train_epoch());
    if (on_epoch) on_epoch(e, result.history.back(), trainer);
  }
  result.params = trainer.params();
  result.embedding = trainer.embedding();
  return result;
}

}  // namespace dmgae
