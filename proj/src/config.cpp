#include "dmgae/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmgae {

namespace {

std::string join(const std::vector<std::string>& problems) {
  std::string out = "configuration error";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

bool parse_double(const std::string& s, double& out) {
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return !s.empty() && end == s.c_str() + s.size();
}

template <typename Int>
bool parse_int(const std::string& s, Int& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0") {
    out = false;
    return true;
  }
  return false;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "alpha",      "beta",      "nu_input",   "nu_latent",      "perplexity",
      "k_samples",  "fc_layers", "fc_hidden",  "gcn_hidden",     "latent_dim",
      "lr",         "batch_size", "epochs",    "seed",           "variational",
      "manifold",   "prior_graph", "knn_k",    "normalize_features", "checkpoint_every"};
  return keys;
}

KeyValues parse_key_values(std::string_view text, std::vector<std::string>& problems) {
  KeyValues out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto next = text.find('\n', pos);
    std::string_view line = text.substr(pos, next == std::string_view::npos ? text.npos : next - pos);
    pos = next == std::string_view::npos ? text.size() + 1 : next + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(line_no) + ": expected key=value");
      continue;
    }
    out[trim(std::string_view(content).substr(0, eq))] = trim(std::string_view(content).substr(eq + 1));
  }
  return out;
}

KeyValues read_key_value_file(const std::string& path, std::vector<std::string>& problems) {
  std::ifstream in(path);
  if (!in) {
    problems.push_back("cannot open config file " + path);
    return {};
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::vector<std::string> local;
  KeyValues values = parse_key_values(buffer.str(), local);
  for (auto& p : local) problems.push_back(path + ": " + p);
  return values;
}

TrainConfig apply_overrides(const KeyValues& values, TrainConfig cfg,
                            std::vector<std::string>& problems) {
  for (const auto& [key, value] : values) {
    const auto bad = [&, &key = key, &value = value] {
      problems.push_back("invalid value '" + value + "' for " + key);
    };
    bool ok = true;
    if (key == "alpha") ok = parse_double(value, cfg.alpha);
    else if (key == "beta") ok = parse_double(value, cfg.beta);
    else if (key == "nu_input") ok = parse_double(value, cfg.nu_input);
    else if (key == "nu_latent") ok = parse_double(value, cfg.nu_latent);
    else if (key == "perplexity") ok = parse_double(value, cfg.perplexity);
    else if (key == "k_samples") ok = parse_int(value, cfg.k_samples);
    else if (key == "fc_layers") ok = parse_int(value, cfg.fc_layers);
    else if (key == "fc_hidden") ok = parse_int(value, cfg.fc_hidden);
    else if (key == "gcn_hidden") ok = parse_int(value, cfg.gcn_hidden);
    else if (key == "latent_dim") ok = parse_int(value, cfg.latent_dim);
    else if (key == "lr") ok = parse_double(value, cfg.lr);
    else if (key == "batch_size") ok = parse_int(value, cfg.batch_size);
    else if (key == "epochs") ok = parse_int(value, cfg.epochs);
    else if (key == "seed") ok = parse_int(value, cfg.seed);
    else if (key == "variational") ok = parse_bool(value, cfg.variational);
    else if (key == "manifold") ok = parse_bool(value, cfg.manifold);
    else if (key == "knn_k") ok = parse_int(value, cfg.knn_k);
    else if (key == "normalize_features") ok = parse_bool(value, cfg.normalize_features);
    else if (key == "checkpoint_every") ok = parse_int(value, cfg.checkpoint_every);
    else if (key == "prior_graph") {
      if (value == "given") cfg.prior_graph = PriorGraph::given;
      else if (value == "knn") cfg.prior_graph = PriorGraph::knn;
      else ok = false;
    } else {
      problems.push_back("unknown key '" + key + "'");
      continue;
    }
    if (!ok) bad();
  }
  return cfg;
}

KeyValues to_key_values(const TrainConfig& cfg) {
  return {
      {"alpha", format_double(cfg.alpha)},
      {"beta", format_double(cfg.beta)},
      {"nu_input", format_double(cfg.nu_input)},
      {"nu_latent", format_double(cfg.nu_latent)},
      {"perplexity", format_double(cfg.perplexity)},
      {"k_samples", std::to_string(cfg.k_samples)},
      {"fc_layers", std::to_string(cfg.fc_layers)},
      {"fc_hidden", std::to_string(cfg.fc_hidden)},
      {"gcn_hidden", std::to_string(cfg.gcn_hidden)},
      {"latent_dim", std::to_string(cfg.latent_dim)},
      {"lr", format_double(cfg.lr)},
      {"batch_size", std::to_string(cfg.batch_size)},
      {"epochs", std::to_string(cfg.epochs)},
      {"seed", std::to_string(cfg.seed)},
      {"variational", cfg.variational ? "true" : "false"},
      {"manifold", cfg.manifold ? "true" : "false"},
      {"prior_graph", cfg.prior_graph == PriorGraph::knn ? "knn" : "given"},
      {"knn_k", std::to_string(cfg.knn_k)},
      {"normalize_features", cfg.normalize_features ? "true" : "false"},
      {"checkpoint_every", std::to_string(cfg.checkpoint_every)},
  };
}

std::string to_config_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : to_key_values(cfg)) out += key + "=" + value + "\n";
  return out;
}

}  // namespace dmgae
