#include "dmgae/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dmgae {

namespace {

constexpr const char* kCheckpointFormat = "dmgae-checkpoint";
constexpr int kCheckpointVersion = 1;

Matrix glorot_uniform(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
  }
  return w;
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

}  // namespace

ModelParams ModelParams::glorot(const ModelDims& dims, std::uint64_t seed) {
  if (dims.input_dim <= 0 || dims.gcn_hidden <= 0 || dims.latent_dim <= 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  ModelParams p;
  int in = dims.input_dim;
  for (int h : dims.fc_hidden) {
    if (h <= 0) throw std::invalid_argument("FC hidden sizes must be positive");
    p.fc_weights.push_back(glorot_uniform(in, h, rng));
    p.fc_biases.push_back(Matrix::Zero(1, h));
    in = h;
  }
  p.gcn_shared = glorot_uniform(in, dims.gcn_hidden, rng);
  p.gcn_mu = glorot_uniform(dims.gcn_hidden, dims.latent_dim, rng);
  p.gcn_logstd = glorot_uniform(dims.gcn_hidden, dims.latent_dim, rng);
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (auto& [name, tensor] : z.named_tensors()) tensor->setZero();
  return z;
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::named_tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (std::size_t i = 0; i < fc_weights.size(); ++i) {
    out.emplace_back("fc." + std::to_string(i) + ".weight", &fc_weights[i]);
    out.emplace_back("fc." + std::to_string(i) + ".bias", &fc_biases[i]);
  }
  out.emplace_back("gcn.shared", &gcn_shared);
  out.emplace_back("gcn.mu", &gcn_mu);
  out.emplace_back("gcn.logstd", &gcn_logstd);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::named_tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, tensor] : const_cast<ModelParams*>(this)->named_tensors()) {
    out.emplace_back(name, tensor);
  }
  return out;
}

ModelDims ModelParams::dims() const {
  ModelDims d;
  d.fc_hidden.clear();
  d.input_dim = static_cast<int>(fc_weights.empty() ? gcn_shared.rows() : fc_weights.front().rows());
  for (const Matrix& w : fc_weights) d.fc_hidden.push_back(static_cast<int>(w.cols()));
  d.gcn_hidden = static_cast<int>(gcn_shared.cols());
  d.latent_dim = static_cast<int>(gcn_mu.cols());
  return d;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, tensor] : named_tensors()) {
    if (!tensor->allFinite()) return false;
  }
  return true;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t count = 0;
  for (const auto& [name, tensor] : named_tensors()) count += static_cast<std::size_t>(tensor->size());
  return count;
}

FeatureInput::FeatureInput(const Matrix& x, double sparse_density_threshold) : dense_(x) {
  const auto nonzeros = static_cast<double>((x.array() != 0.0).count());
  const auto total = static_cast<double>(std::max<Eigen::Index>(1, x.size()));
  if (nonzeros / total < sparse_density_threshold) {
    sparse_ = SparseMatrix(x.sparseView());
  }
}

Matrix fc_forward(const Matrix& x, const ModelParams& params) {
  Matrix h = x;
  for (std::size_t l = 0; l < params.fc_weights.size(); ++l) {
    Matrix pre = h * params.fc_weights[l];
    pre.rowwise() += params.fc_biases[l].row(0);
    h = pre.cwiseMax(0.0);
  }
  return h;
}

EncoderOutput encode(const Matrix& x_prime, const NormalizedAdjacency& a_norm,
                     const ModelParams& params) {
  const SparseMatrix& a = a_norm.sparse();
  const Matrix hidden = Matrix(a * (x_prime * params.gcn_shared)).cwiseMax(0.0);
  const Matrix propagated = a * hidden;
  EncoderOutput out;
  out.mu = propagated * params.gcn_mu;
  out.log_std = (propagated * params.gcn_logstd).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  return out;
}

std::vector<LatentSample> sample_latent(const EncoderOutput& enc, int k, std::uint64_t seed,
                                        bool variational) {
  if (k < 1) throw std::invalid_argument("sample_latent needs k >= 1");
  std::vector<LatentSample> samples;
  samples.reserve(static_cast<std::size_t>(k));
  if (!variational) {
    for (int s = 0; s < k; ++s) {
      samples.push_back({enc.mu, Matrix::Zero(enc.mu.rows(), enc.mu.cols())});
    }
    return samples;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix std_dev = enc.log_std.array().exp();
  for (int s = 0; s < k; ++s) {
    LatentSample sample;
    sample.epsilon.resize(enc.mu.rows(), enc.mu.cols());
    for (Eigen::Index j = 0; j < sample.epsilon.cols(); ++j) {
      for (Eigen::Index i = 0; i < sample.epsilon.rows(); ++i) sample.epsilon(i, j) = normal(rng);
    }
    sample.z = enc.mu + std_dev.cwiseProduct(sample.epsilon);
    samples.push_back(std::move(sample));
  }
  return samples;
}

Matrix decode(const Matrix& z) { return sigmoid(z * z.transpose()); }

ParamVars ParamVars::bind(ad::Tape& tape, const ModelParams& params) {
  ParamVars v;
  for (std::size_t l = 0; l < params.fc_weights.size(); ++l) {
    v.fc_weights.push_back(tape.leaf(params.fc_weights[l]));
    v.fc_biases.push_back(tape.leaf(params.fc_biases[l]));
  }
  v.gcn_shared = tape.leaf(params.gcn_shared);
  v.gcn_mu = tape.leaf(params.gcn_mu);
  v.gcn_logstd = tape.leaf(params.gcn_logstd);
  return v;
}

ModelParams ParamVars::gradients(const ad::Tape& tape) const {
  ModelParams g;
  for (std::size_t l = 0; l < fc_weights.size(); ++l) {
    g.fc_weights.push_back(tape.grad(fc_weights[l]));
    g.fc_biases.push_back(tape.grad(fc_biases[l]));
  }
  g.gcn_shared = tape.grad(gcn_shared);
  g.gcn_mu = tape.grad(gcn_mu);
  g.gcn_logstd = tape.grad(gcn_logstd);
  return g;
}

ad::Var fc_forward(ad::Tape& tape, const FeatureInput& x, const ParamVars& params) {
  if (params.fc_weights.empty()) return tape.constant(x.dense());
  ad::Var h;
  for (std::size_t l = 0; l < params.fc_weights.size(); ++l) {
    ad::Var pre;
    if (l == 0) {
      pre = x.sparse() ? ad::spmm(*x.sparse(), params.fc_weights[0])
                       : ad::matmul(tape.constant(x.dense()), params.fc_weights[0]);
    } else {
      pre = ad::matmul(h, params.fc_weights[l]);
    }
    h = ad::relu(ad::add_row(pre, params.fc_biases[l]));
  }
  return h;
}

EncoderVars encode(ad::Var x_prime, const NormalizedAdjacency& a_norm, const ParamVars& params) {
  const SparseMatrix& a = a_norm.sparse();
  ad::Var hidden = ad::relu(ad::spmm(a, ad::matmul(x_prime, params.gcn_shared)));
  ad::Var propagated = ad::spmm(a, hidden);
  EncoderVars out;
  out.mu = ad::matmul(propagated, params.gcn_mu);
  out.log_std = ad::clamp(ad::matmul(propagated, params.gcn_logstd), kLogStdMin, kLogStdMax);
  return out;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  auto targets = params.named_tensors();
  const auto sources = grads.named_tensors();
  if (targets.size() != sources.size()) throw std::invalid_argument("adam_step: layout mismatch");
  if (state.m.empty()) {
    for (auto& [name, tensor] : targets) {
      state.m.push_back(Matrix::Zero(tensor->rows(), tensor->cols()));
      state.v.push_back(Matrix::Zero(tensor->rows(), tensor->cols()));
    }
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Matrix& p = *targets[i].second;
    const Matrix& g = *sources[i].second;
    if (p.rows() != g.rows() || p.cols() != g.cols()) {
      throw std::invalid_argument("adam_step: shape mismatch for " + targets[i].first);
    }
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g.cwiseProduct(g);
    const auto m_hat = state.m[i].array() / correction1;
    const auto v_hat = state.v[i].array() / correction2;
    p.array() -= lr * m_hat / (v_hat.sqrt() + kAdamEpsilon);
  }
}

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["version"] = kCheckpointVersion;
  manifest["tensors"] = nlohmann::json::array();
  char buf[32];
  for (const auto& [name, tensor] : params.named_tensors()) {
    const std::string file = name + ".tsv";
    manifest["tensors"].push_back(
        {{"name", name}, {"rows", tensor->rows()}, {"cols", tensor->cols()}, {"file", file}});
    std::ofstream out(dir / file);
    if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
    for (Eigen::Index i = 0; i < tensor->rows(); ++i) {
      for (Eigen::Index j = 0; j < tensor->cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", (*tensor)(i, j));
        if (j > 0) out << '\t';
        out << buf;
      }
      out << '\n';
    }
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
  const nlohmann::json manifest = nlohmann::json::parse(in);
  if (manifest.value("format", "") != kCheckpointFormat ||
      manifest.value("version", -1) != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint format in " + dir.string());
  }
  ModelParams params;
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name");
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    Matrix t(rows, cols);
    std::ifstream data(dir / entry.at("file").get<std::string>());
    if (!data) throw std::runtime_error("missing tensor file for " + name);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (!(data >> t(i, j))) throw std::runtime_error("truncated tensor " + name);
      }
    }
    if (name == "gcn.shared") {
      params.gcn_shared = std::move(t);
    } else if (name == "gcn.mu") {
      params.gcn_mu = std::move(t);
    } else if (name == "gcn.logstd") {
      params.gcn_logstd = std::move(t);
    } else if (name.starts_with("fc.")) {
      const auto dot = name.find('.', 3);
      const auto layer = static_cast<std::size_t>(std::stoul(name.substr(3, dot - 3)));
      const std::string kind = name.substr(dot + 1);
      if (params.fc_weights.size() <= layer) {
        params.fc_weights.resize(layer + 1);
        params.fc_biases.resize(layer + 1);
      }
      (kind == "weight" ? params.fc_weights : params.fc_biases)[layer] = std::move(t);
    } else {
      throw std::runtime_error("unknown tensor " + name + " in checkpoint");
    }
  }
  return params;
}

}  // namespace dmgae
