// Acceptance checks that need no external data. One line per criterion;
// exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "dmgae/evaluation.hpp"
#include "dmgae/io.hpp"
#include "dmgae/objective.hpp"
#include "dmgae/similarity.hpp"
#include "dmgae/training.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace dmgae;

namespace {

// Pinned tolerances.
constexpr double kCoefficientTol = 1e-10;
constexpr double kMassTol = 1e-4;
constexpr double kGridRelTol = 1e-3;
constexpr double kSymmetryTol = 1e-12;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradStep = 1e-4;
constexpr double kLinearityTol = 1e-10;
constexpr double kMetricTol = 1e-12;
constexpr double kSbmAcc = 0.90;
constexpr int kSbmSeedsRequired = 8;
constexpr double kGradientBudgetSeconds = 60.0;
constexpr double kSbmBudgetSeconds = 120.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome kernel_identities() {
  Outcome o;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int exact_failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const double sigma = std::exp(unit(rng) * 10.0 - 5.0);
    const double nu = std::exp(unit(rng) * 6.0 - 2.0);
    if (t_kernel(0.0, sigma, nu) != kernel_coefficient(nu)) ++exact_failures;
  }
  const double c1 = std::sqrt(2.0 * std::numbers::pi) / std::numbers::pi;
  const double gamma_oracle = std::sqrt(2.0 * std::numbers::pi) * std::tgamma(1.0) /
                              (std::sqrt(std::numbers::pi) * std::tgamma(0.5));
  const double c1_err = std::max(std::abs(kernel_coefficient(1.0) - c1),
                                 std::abs(kernel_coefficient(1.0) - gamma_oracle));
  int monotone_failures = 0;
  for (int t = 0; t < 10000; ++t) {
    const double sigma = std::exp(unit(rng) * 6.0 - 3.0);
    const double nu = std::exp(unit(rng) * 6.0 - 2.0);
    const double d = unit(rng) * 5.0 * sigma;
    const double d2 = d + (0.01 + unit(rng)) * sigma;
    if (!(t_kernel(d2, sigma, nu) < t_kernel(d, sigma, nu))) ++monotone_failures;
  }
  o.pass = exact_failures == 0 && c1_err <= kCoefficientTol && monotone_failures == 0;
  o.detail = fmt("C_1 err %.2e, k(0) mismatches %.0f, monotonicity violations %.0f/10000", c1_err,
                 exact_failures, monotone_failures);
  return o;
}

double row_mass(std::span<const double> row, double sigma, double nu) {
  double s = 0.0;
  for (double d : row) s += t_kernel(d, sigma, nu);
  return s;
}

// Coarse log-spaced scan, then a fine scan inside the best coarse cell.
double grid_scan_sigma(std::span<const double> row, double nu, double perplexity) {
  const double target = std::log2(perplexity);
  const auto scan = [&](double lo, double hi, int steps) {
    double best = lo;
    double best_err = INFINITY;
    for (int s = 0; s <= steps; ++s) {
      const double sigma = lo * std::pow(hi / lo, static_cast<double>(s) / steps);
      const double err = std::abs(row_mass(row, sigma, nu) - target);
      if (err < best_err) {
        best_err = err;
        best = sigma;
      }
    }
    return best;
  };
  const double coarse_ratio = std::pow(1e8, 1.0 / 4000.0);
  const double coarse = scan(1e-4, 1e4, 4000);
  return scan(coarse / coarse_ratio, coarse * coarse_ratio, 4000);
}

Outcome calibration() {
  Outcome o;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_mass = 0.0;
  double worst_grid = 0.0;
  int flagged = 0;
  for (int r = 0; r < 100; ++r) {
    // One row of a 50-node distance matrix, already offset by its minimum.
    std::vector<double> row(49);
    const double scale = std::exp(unit(rng) * 4.0 - 2.0);
    for (double& d : row) d = scale * -std::log(1.0 - unit(rng));
    const double rho = *std::min_element(row.begin(), row.end());
    for (double& d : row) d -= rho;
    const double nu = r % 2 == 0 ? 100.0 : 1.0 + 9.0 * unit(rng);
    const double qp = 5.0 + 25.0 * unit(rng);
    const auto c = calibrate_sigma(row, nu, qp);
    if (c.flagged) {
      ++flagged;
      continue;
    }
    worst_mass = std::max(worst_mass, std::abs(row_mass(row, c.sigma, nu) - std::log2(qp)));
    const double grid = grid_scan_sigma(row, nu, qp);
    worst_grid = std::max(worst_grid, std::abs(c.sigma - grid) / grid);
  }
  o.pass = flagged == 0 && worst_mass <= kMassTol && worst_grid <= kGridRelTol;
  o.detail = fmt("max |mass - log2 Qp| %.2e, max grid rel diff %.2e, flagged %.0f/100", worst_mass,
                 worst_grid, flagged);
  return o;
}

Outcome symmetrization() {
  Outcome o;
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Index n = 101;  // 101 * 100 ordered pairs, >= 10^4
  Matrix cond(n, n);
  for (Eigen::Index i = 0; i < cond.size(); ++i) cond.data()[i] = unit(rng);
  const Matrix p = symmetrize(cond);
  const double asym = (p - p.transpose()).cwiseAbs().maxCoeff();
  const bool bounded = p.minCoeff() >= 0.0 && p.maxCoeff() <= 1.0;
  Matrix half = Matrix::Constant(2, 2, 0.5);
  Matrix one = Matrix::Constant(2, 2, 1.0);
  const double fixed = symmetrize(half)(0, 1);
  const double boundary = symmetrize(one)(0, 1);
  o.pass = asym <= kSymmetryTol && bounded && fixed == 0.5 && boundary == 0.0;
  o.detail = fmt("asymmetry %.2e, f(0.5,0.5)=%.17g, f(1,1)=%.17g", asym, fixed, boundary);
  if (!bounded) o.detail += ", out of [0,1]";
  return o;
}

Outcome losses() {
  Outcome o;
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  int self_nonzero = 0;
  int negative = 0;
  for (int t = 0; t < 10000; ++t) {
    const double a = unit(rng);
    const double b = unit(rng);
    if (logistic_loss(a, a) != 0.0) ++self_nonzero;
    if (logistic_loss(a, b) < 0.0) ++negative;
  }
  // Boundary targets are part of the domain too.
  for (double a : {0.0, 1.0}) {
    if (logistic_loss(a, a) != 0.0) ++self_nonzero;
  }
  const double kl_zero = kl_loss({Matrix::Zero(7, 3), Matrix::Zero(7, 3)});
  int kl_negative = 0;
  for (int t = 0; t < 1000; ++t) {
    EncoderOutput enc{Matrix(5, 4), Matrix(5, 4)};
    for (Eigen::Index i = 0; i < enc.mu.size(); ++i) {
      enc.mu.data()[i] = normal(rng);
      enc.log_std.data()[i] = normal(rng);
    }
    if (kl_loss(enc) < 0.0) ++kl_negative;
  }
  // Linearity of the assembled objective in beta, through the trainer.
  const auto g = test::six_node_fixture();
  const std::vector<int> batch = {0, 1, 2, 3, 4, 5};
  std::vector<double> totals;
  double parts = 0.0;
  double l2 = 0.0;
  for (double beta : {0.0, 0.5, 1.0, 3.0}) {
    const TrainConfig cfg = test::small_config(true, true, beta);
    Trainer trainer(g, cfg);
    const auto r = trainer.batch_loss(trainer.params(), batch, test::fixed_noise(cfg, 6, 1)).report;
    totals.push_back(r.total);
    parts = r.recon + r.kl.value_or(0.0);
    l2 = r.structure();
  }
  double linearity = 0.0;
  const double betas[] = {0.0, 0.5, 1.0, 3.0};
  for (std::size_t i = 0; i < totals.size(); ++i) {
    const double expected = total_loss(l2, parts, betas[i]);
    linearity = std::max(linearity, std::abs(totals[i] - expected) / std::max(1.0, std::abs(expected)));
  }
  o.pass = self_nonzero == 0 && negative == 0 && kl_zero == 0.0 && kl_negative == 0 &&
           linearity <= kLinearityTol;
  o.detail = fmt("L_M(a,a)!=0: %.0f, L_M<0: %.0f, ", self_nonzero, negative) +
             fmt("KL(0,0)=%.3g, KL<0: %.0f, beta linearity err %.2e", kl_zero, kl_negative, linearity);
  return o;
}

Outcome gradients() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = test::six_node_fixture();
  const std::vector<int> batch = {0, 1, 2, 3, 4, 5};
  struct Case {
    const char* name;
    TrainConfig cfg;
  };
  const std::vector<Case> cases = {
      {"L0", test::small_config(true, false)},
      {"L1", test::small_config(false, false)},
      {"L2", test::small_config(true, true, 0.0)},
      {"L", test::small_config(true, true)},
      {"L'", test::small_config(false, true)},
  };
  std::ostringstream detail;
  for (const auto& c : cases) {
    Trainer trainer(g, c.cfg);
    const auto check = test::check_batch_gradient(trainer, batch, test::fixed_noise(c.cfg, 6, 4), kGradStep);
    if (!(check.max_relative_error <= kGradRelTol)) o.pass = false;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s %.1e, ", c.name, check.max_relative_error);
    detail << buf;
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= kGradientBudgetSeconds) o.pass = false;
  o.detail = detail.str() + fmt("%.1fs", elapsed);
  return o;
}

Outcome metrics() {
  Outcome o;
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> level(0, 12);
  double auc_err = 0.0;
  int fixtures = 0;
  for (int np = 1; np <= 14; ++np) {
    for (int nn = 1; nn <= 14 && np * nn <= 200; ++nn) {
      std::vector<double> p(static_cast<std::size_t>(np));
      std::vector<double> n(static_cast<std::size_t>(nn));
      for (double& v : p) v = level(rng) / 12.0;
      for (double& v : n) v = level(rng) / 12.0;
      double wins = 0.0;
      for (double a : p) {
        for (double b : n) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
      }
      auc_err = std::max(auc_err, std::abs(roc_auc(p, n) - wins / (np * nn)));
      ++fixtures;
    }
  }
  const std::vector<int> truth = {0, 0, 0, 1, 1, 1, 2, 2, 2, 2};
  const std::vector<int> pred = {2, 2, 1, 0, 0, 0, 1, 1, 1, 0};
  const auto r = clustering_metrics(pred, truth);
  const double fixture_err = std::max({std::abs(r.acc - 0.8), std::abs(r.nmi - 0.59616182041946852),
                                       std::abs(r.f1 - 0.80238095238095231)});
  // Relabeling predictions by a permutation leaves every metric unchanged.
  double perm_err = 0.0;
  std::vector<int> perm = {0, 1, 2, 3};
  do {
    std::vector<int> noisy(40);
    std::vector<int> t40(40);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, 3);
    for (int i = 0; i < 40; ++i) {
      t40[static_cast<std::size_t>(i)] = i % 4;
      noisy[static_cast<std::size_t>(i)] = unit(rng) < 0.8 ? i % 4 : cls(rng);
    }
    std::vector<int> relabeled(40);
    for (int i = 0; i < 40; ++i) {
      relabeled[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(noisy[static_cast<std::size_t>(i)])];
    }
    const auto a = clustering_metrics(noisy, t40);
    const auto b = clustering_metrics(relabeled, t40);
    perm_err = std::max({perm_err, std::abs(a.acc - b.acc), std::abs(a.nmi - b.nmi), std::abs(a.f1 - b.f1)});
  } while (std::next_permutation(perm.begin(), perm.end()));
  o.pass = auc_err <= kMetricTol && fixture_err <= kMetricTol && perm_err <= kMetricTol;
  o.detail = fmt("AUC vs pair count %.2e over %.0f fixtures, ", auc_err, fixtures) +
             fmt("ACC/NMI/F1 fixture err %.2e, permutation err %.2e", fixture_err, perm_err);
  return o;
}

Outcome determinism() {
  Outcome o;
  test::TempDir dir("acceptance_det");
  const auto g = test::make_sbm(30, 0.4, 0.05, 3, 6);
  const auto data = dir.path() / "data";
  std::filesystem::create_directories(data);
  write_graph(g, data / "edges.txt", data / "features.txt", data / "labels.txt");
  std::ostringstream sink;
  const int first = cli::run({"train", "--data", data.string(), "--out", (dir.path() / "seed").string(),
                              "--epochs=20", "--seed=7", "--fc_hidden=32", "--gcn_hidden=32",
                              "--latent_dim=8"},
                             sink, sink);
  const auto manifest = (dir.path() / "seed" / "manifest.json").string();
  const int a = cli::run({"train", "--manifest", manifest, "--out", (dir.path() / "a").string()}, sink, sink);
  const int b = cli::run({"train", "--manifest", manifest, "--out", (dir.path() / "b").string()}, sink, sink);
  if (first != 0 || a != 0 || b != 0) {
    o.pass = false;
    o.detail = "train failed: " + sink.str();
    return o;
  }
  const std::string ea = read_text_file(dir.path() / "a" / "embeddings.tsv");
  const std::string eb = read_text_file(dir.path() / "b" / "embeddings.tsv");
  o.pass = ea == eb && !ea.empty();
  o.detail = "embeddings.tsv " + git_blob_hash(ea).substr(0, 12) + " vs " + git_blob_hash(eb).substr(0, 12);
  return o;
}

Outcome sbm_sanity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  int good = 0;
  std::ostringstream accs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = test::make_sbm(40, 0.5, 0.02, 1000 + seed);
    TrainConfig cfg;
    cfg.seed = seed;
    const auto result = fit(g, cfg);
    const auto km = kmeans(result.embedding, 2, seed);
    const double acc = clustering_metrics(km.labels, *g.labels()).acc;
    if (acc >= kSbmAcc) ++good;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.3f ", acc);
    accs << buf;
  }
  const double elapsed = seconds_since(t0);
  o.pass = good >= kSbmSeedsRequired && elapsed < kSbmBudgetSeconds;
  o.detail = fmt("%.0f/10 seeds with ACC >= 0.90 (", good) + accs.str() + fmt(") %.1fs", elapsed);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 kernel identities", kernel_identities},
      {"2 calibration", calibration},
      {"3 symmetrization", symmetrization},
      {"4 losses", losses},
      {"5 gradients", gradients},
      {"6 metric oracles", metrics},
      {"7 determinism", determinism},
      {"8 sbm sanity", sbm_sanity},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  [%s] %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
