#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dmgae/autograd.hpp"
#include "dmgae/model.hpp"
#include "dmgae/similarity.hpp"

namespace dmgae {

// Inside the logistic loss, b and 1 - b are each floored at kLossEpsilon
// before the log. Decoded edge probabilities are clamped to
// [kLossEpsilon, 1 - kLossEpsilon] inside the reconstruction loss.
inline constexpr double kLossEpsilon = 1e-7;

struct LossReport {
  double recon = 0.0;
  std::optional<double> kl;  // absent on the non-variational path
  double manifold_prior = 0.0;
  double manifold_complete = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  double structure() const { return manifold_prior + alpha * manifold_complete; }
};

// Negated, class-balanced Bernoulli log-likelihood of the 0/1 target matrix
// `a` under edge probabilities `a_hat`. With P positive entries out of N,
// positives are weighted by (N - P) / P and the mean is scaled by
// N / (2 (N - P)). Without positives (or negatives) the plain mean BCE is
// used; `degenerate` reports that case when non-null.
double recon_loss(const Matrix& a, const Matrix& a_hat, bool* degenerate = nullptr);

// (1/n) sum 1/2 (exp(2 log_std) + mu^2 - 1 - 2 log_std), n = rows.
double kl_loss(const EncoderOutput& enc);

// a log(a/b) + (1-a) log((1-a)/(1-b)), with 0 log 0 = 0 and the log
// arguments b, 1 - b floored at kLossEpsilon.
double logistic_loss(double a, double b);
// Elementwise logistic loss averaged over the pairs i < j.
double logistic_loss(const Matrix& target, const Matrix& model);

// (1/K) sum_k [ L_M(P_prior, P_k) + alpha L_M(P_complete, P_k) ].
double structure_loss(const SimilarityMatrix& p_prior, const SimilarityMatrix& p_complete,
                      std::span<const SimilarityMatrix> p_latent, double alpha);

// L2 + beta * (recon + kl) on the variational path, L2 + beta * recon
// otherwise; `recon_or_elbo` is whichever of the two the caller assembled.
inline double total_loss(double l2, double recon_or_elbo, double beta) {
  return l2 + beta * recon_or_elbo;
}

// Fills `total` from the parts according to whether kl is present.
void finalize(LossReport& report);

// Differentiable forms.
namespace loss {

ad::Var recon(ad::Var logits, const Matrix& a);
ad::Var kl(ad::Var mu, ad::Var log_std);
ad::Var logistic(const Matrix& target, ad::Var model);

// Latent-space similarity on a node subset: sigma = 1, rho = 0, pairs
// outside `edge_mask` (and the diagonal) get p_{i|j} = 0.
ad::Var latent_similarity(ad::Var z, const Matrix& edge_mask, double nu);

}  // namespace loss

}  // namespace dmgae
