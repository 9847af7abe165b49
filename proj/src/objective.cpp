#include "dmgae/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmgae {

namespace {

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

struct BalanceWeights {
  double positive = 1.0;
  double norm = 1.0;
  bool degenerate = false;
};

BalanceWeights balance_weights(const Matrix& a) {
  const double total = static_cast<double>(a.size());
  const double positives = a.sum();
  BalanceWeights w;
  if (positives <= 0.0 || positives >= total) {
    w.degenerate = true;
    return w;
  }
  w.positive = (total - positives) / positives;
  w.norm = total / (2.0 * (total - positives));
  return w;
}


}  // namespace

double recon_loss(const Matrix& a, const Matrix& a_hat, bool* degenerate) {
  if (a.rows() != a_hat.rows() || a.cols() != a_hat.cols()) {
    throw std::invalid_argument("recon_loss: shape mismatch");
  }
  const BalanceWeights w = balance_weights(a);
  if (degenerate) *degenerate = w.degenerate;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double p = std::clamp(a_hat(i, j), kLossEpsilon, 1.0 - kLossEpsilon);
      sum += w.positive * a(i, j) * std::log(p) + (1.0 - a(i, j)) * std::log(1.0 - p);
    }
  }
  return -w.norm * sum / static_cast<double>(a.size());
}

double kl_loss(const EncoderOutput& enc) {
  const auto& mu = enc.mu.array();
  const auto& ls = enc.log_std.array();
  const double sum = 0.5 * ((2.0 * ls).exp() + mu.square() - 1.0 - 2.0 * ls).sum();
  return sum / static_cast<double>(enc.mu.rows());
}

double logistic_loss(double a, double b) {
  const double lb = std::log(std::max(b, kLossEpsilon));
  const double lnb = std::log(std::max(1.0 - b, kLossEpsilon));
  return xlogy(a, a) - a * lb + xlogy(1.0 - a, 1.0 - a) - (1.0 - a) * lnb;
}

double logistic_loss(const Matrix& target, const Matrix& model) {
  if (target.rows() != model.rows() || target.cols() != model.cols()) {
    throw std::invalid_argument("logistic_loss: shape mismatch");
  }
  const Eigen::Index n = target.rows();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (Eigen::Index j = 1; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) sum += logistic_loss(target(i, j), model(i, j));
  }
  return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double structure_loss(const SimilarityMatrix& p_prior, const SimilarityMatrix& p_complete,
                      std::span<const SimilarityMatrix> p_latent, double alpha) {
  if (p_latent.empty()) throw std::invalid_argument("structure_loss needs K >= 1");
  double sum = 0.0;
  for (const SimilarityMatrix& p : p_latent) {
    sum += logistic_loss(p_prior, p) + alpha * logistic_loss(p_complete, p);
  }
  return sum / static_cast<double>(p_latent.size());
}

void finalize(LossReport& report) {
  const double reconstruction = report.recon + report.kl.value_or(0.0);
  report.total = total_loss(report.structure(), reconstruction, report.beta);
}

namespace loss {

ad::Var recon(ad::Var logits, const Matrix& a) {
  if (logits.rows() != a.rows() || logits.cols() != a.cols()) {
    throw std::invalid_argument("recon: shape mismatch");
  }
  ad::Tape& tape = *logits.tape();
  const Matrix p = (1.0 + (-logits.value().array()).exp()).inverse().matrix();
  Matrix value(1, 1);
  value(0, 0) = recon_loss(a, p);
  return tape.record(std::move(value), {logits}, [logits, a, p](ad::Tape& t, std::size_t self) {
    const BalanceWeights w = balance_weights(a);
    const double g = -w.norm * t.output_grad(self)(0, 0) / static_cast<double>(a.size());
    // d/dx of w a log p + (1 - a) log(1 - p) is w a (1 - p) - (1 - a) p,
    // zero where the clamp on p is active.
    const auto inside = (p.array() >= kLossEpsilon && p.array() <= 1.0 - kLossEpsilon).cast<double>();
    const auto pa = p.array();
    const auto aa = a.array();
    Matrix grad = (g * inside * (w.positive * aa * (1.0 - pa) - (1.0 - aa) * pa)).matrix();
    t.accumulate(logits, std::move(grad));
  });
}

ad::Var kl(ad::Var mu, ad::Var log_std) {
  ad::Var terms = ad::sub(ad::add(ad::exp(ad::scale(log_std, 2.0)), ad::mul(mu, mu)),
                          ad::shift(ad::scale(log_std, 2.0), 1.0));
  return ad::scale(ad::sum(terms), 0.5 / static_cast<double>(mu.rows()));
}

ad::Var logistic(const Matrix& target, ad::Var model) {
  const Eigen::Index n = target.rows();
  ad::Tape& tape = *model.tape();
  if (n < 2) return tape.constant(Matrix::Zero(1, 1));
  if (model.rows() != n || model.cols() != target.cols()) {
    throw std::invalid_argument("logistic: shape mismatch");
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  Matrix value(1, 1);
  value(0, 0) = logistic_loss(target, model.value());
  // Fused: the unfused form costs about ten n x n tape nodes per call.
  return tape.record(std::move(value), {model}, [target, model, pairs](ad::Tape& t, std::size_t self) {
    const double g = t.output_grad(self)(0, 0) / pairs;
    const Matrix& b = model.value();
    const Eigen::Index n = b.rows();
    Matrix grad = Matrix::Zero(n, n);
    for (Eigen::Index j = 1; j < n; ++j) {
      for (Eigen::Index i = 0; i < j; ++i) {
        const double a = target(i, j);
        const double bij = b(i, j);
        double d = 0.0;
        if (bij >= kLossEpsilon) d -= a / bij;
        if (1.0 - bij >= kLossEpsilon) d += (1.0 - a) / (1.0 - bij);
        grad(i, j) = g * d;
      }
    }
    t.accumulate(model, std::move(grad));
  });
}

ad::Var latent_similarity(ad::Var z, const Matrix& edge_mask, double nu) {
  const double coefficient = kernel_coefficient(nu);
  const double exponent = -0.5 * (nu + 1.0);
  ad::Var d = ad::pairwise_distance(z);
  ad::Tape& tape = *z.tape();
  const Eigen::Index n = d.rows();
  Matrix kernel(n, n);
  Matrix p_cond(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double base = 1.0 + d.value()(i, j) / nu;
      kernel(i, j) = coefficient * (exponent == -1.0 ? 1.0 / base : std::pow(base, exponent));
      p_cond(i, j) = std::clamp(kernel(i, j), 0.0, kMaxProbability) * edge_mask(i, j);
    }
  }
  Matrix joint(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = p_cond(i, j);
      const double b = p_cond(j, i);
      joint(i, j) = std::clamp(a + b - 2.0 * a * b, 0.0, 1.0);
    }
  }
  // One fused node from distances to the symmetrized similarity.
  return tape.record(std::move(joint), {d},
                     [d, edge_mask, kernel = std::move(kernel), p_cond = std::move(p_cond), nu,
                      exponent](ad::Tape& t, std::size_t self) {
                       const Matrix& g = t.output_grad(self);
                       const Matrix& dist = d.value();
                       const Eigen::Index n = g.rows();
                       Matrix grad(n, n);
                       for (Eigen::Index j = 0; j < n; ++j) {
                         for (Eigen::Index i = 0; i < n; ++i) {
                           const double a = p_cond(i, j);
                           const double b = p_cond(j, i);
                           const double s = a + b - 2.0 * a * b;
                           // p_ij = p_ji, so both entries of g see p_cond(i, j).
                           const double gc =
                               s >= 0.0 && s <= 1.0 ? (g(i, j) + g(j, i)) * (1.0 - 2.0 * b) : 0.0;
                           const double k = kernel(i, j);
                           const double gk = k <= kMaxProbability ? gc * edge_mask(i, j) : 0.0;
                           grad(i, j) = gk * k * exponent / (nu + dist(i, j));
                         }
                       }
                       t.accumulate(d, std::move(grad));
                     });
}

}  // namespace loss

}  // namespace dmgae
