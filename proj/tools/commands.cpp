#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dmgae/config.hpp"
#include "dmgae/evaluation.hpp"
#include "dmgae/graph.hpp"
#include "dmgae/io.hpp"
#include "dmgae/projection.hpp"
#include "dmgae/similarity.hpp"
#include "dmgae/training.hpp"

namespace dmgae::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Raised for bad user input; maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataPaths {
  fs::path edges;
  fs::path features;
  std::optional<fs::path> labels;
  std::string name;
};

struct DataOptions {
  std::string dir;
  std::string edges;
  std::string features;
  std::string labels;

  void add_to(CLI::App* app) {
    app->add_option("--data", dir, "Directory with edges.txt, features.txt and optional labels.txt");
    app->add_option("--edges", edges, "Edge file");
    app->add_option("--features", features, "Feature file");
    app->add_option("--labels", labels, "Label file");
  }

  bool given() const { return !dir.empty() || !edges.empty() || !features.empty(); }

  DataPaths resolve() const {
    DataPaths p;
    if (!dir.empty()) {
      const fs::path d(dir);
      p.edges = d / "edges.txt";
      p.features = d / "features.txt";
      if (fs::exists(d / "labels.txt")) p.labels = d / "labels.txt";
      p.name = fs::absolute(d).lexically_normal().filename().string();
      if (p.name.empty()) p.name = fs::absolute(d).lexically_normal().parent_path().filename().string();
    }
    if (!edges.empty()) p.edges = edges;
    if (!features.empty()) p.features = features;
    if (!labels.empty()) p.labels = fs::path(labels);
    if (p.edges.empty() || p.features.empty()) {
      throw UsageError("input graph needs --data DIR or both --edges and --features");
    }
    if (p.name.empty()) p.name = p.edges.parent_path().filename().string();
    p.edges = fs::absolute(p.edges).lexically_normal();
    p.features = fs::absolute(p.features).lexically_normal();
    if (p.labels) p.labels = fs::absolute(*p.labels).lexically_normal();
    return p;
  }
};

AttributedGraph load(const DataPaths& p) {
  for (const auto& path : {p.edges, p.features}) {
    if (!fs::exists(path)) throw UsageError("missing input file " + path.string());
  }
  if (p.labels && !fs::exists(*p.labels)) throw UsageError("missing label file " + p.labels->string());
  return load_graph(p.edges, p.features, p.labels);
}

// Pulls "--key=value" arguments naming configuration keys out of `args`.
KeyValues take_overrides(std::vector<std::string>& args) {
  KeyValues overrides;
  const auto& keys = config_keys();
  std::vector<std::string> rest;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (a.rfind("--", 0) == 0 && eq != std::string::npos) {
      std::string key = a.substr(2, eq - 2);
      std::replace(key.begin(), key.end(), '-', '_');
      if (std::find(keys.begin(), keys.end(), key) != keys.end()) {
        overrides[key] = a.substr(eq + 1);
        continue;
      }
    }
    rest.push_back(a);
  }
  args = std::move(rest);
  return overrides;
}

void raise_problems(const std::vector<std::string>& problems) {
  if (!problems.empty()) throw ConfigError(problems);
}

ordered_json read_json(const fs::path& path) {
  try {
    return ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::string config_hash(const TrainConfig& cfg) { return git_blob_hash(to_config_text(cfg)); }

ordered_json read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("missing manifest " + path.string());
  ordered_json m = read_json(path);
  if (m.value("format", "") != kManifestFormat || m.value("version", 0) != kManifestVersion) {
    throw UsageError(path.string() + ": unsupported manifest format or version");
  }
  return m;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) {
    const auto dash = token.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoull(token.substr(0, dash));
        const auto hi = std::stoull(token.substr(dash + 1));
        if (hi < lo) throw UsageError("bad seed range " + token);
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      } else {
        seeds.push_back(std::stoull(token));
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad seed list '" + text + "'");
    }
  }
  if (seeds.empty()) throw UsageError("empty seed list");
  return seeds;
}

// ---------------------------------------------------------------- convert

// LINQS layout: <name>.content rows "<id> <f1> ... <fF> <class>" and
// <name>.cites rows "<cited id> <citing id>".
int convert_planetoid(const fs::path& input, const fs::path& out_dir, std::ostream& out,
                      std::ostream& err) {
  std::vector<fs::path> content_files;
  std::vector<fs::path> cites_files;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input)) {
      if (entry.path().extension() == ".content") content_files.push_back(entry.path());
      if (entry.path().extension() == ".cites") cites_files.push_back(entry.path());
    }
  }
  if (content_files.size() != 1 || cites_files.size() != 1) {
    throw UsageError("unrecognized planetoid layout in " + input.string() +
                     " (expected one .content and one .cites file)");
  }

  std::ifstream content(content_files.front());
  std::vector<std::string> ids;
  std::map<std::string, int> index;
  std::vector<std::vector<std::string>> feature_tokens;
  std::vector<std::string> classes;
  std::string line;
  std::size_t line_no = 0;
  bool has_labels = true;
  while (std::getline(content, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    if (tokens.size() < 2) {
      throw UsageError(content_files.front().string() + ":" + std::to_string(line_no) +
                       ": expected an id followed by features");
    }
    if (ids.empty()) {
      char* end = nullptr;
      std::strtod(tokens.back().c_str(), &end);
      has_labels = *end != '\0';
    }
    if (!index.emplace(tokens.front(), static_cast<int>(ids.size())).second) {
      throw UsageError(content_files.front().string() + ":" + std::to_string(line_no) +
                       ": duplicate node id " + tokens.front());
    }
    ids.push_back(tokens.front());
    if (has_labels) {
      classes.push_back(tokens.back());
      tokens.pop_back();
    }
    tokens.erase(tokens.begin());
    if (!feature_tokens.empty() && tokens.size() != feature_tokens.front().size()) {
      throw UsageError(content_files.front().string() + ":" + std::to_string(line_no) +
                       ": inconsistent feature count");
    }
    feature_tokens.push_back(std::move(tokens));
  }
  if (ids.empty()) throw UsageError(content_files.front().string() + ": no nodes");
  if (!has_labels) err << "warning: no class column found; converting without labels\n";

  const auto n = static_cast<Eigen::Index>(ids.size());
  const auto f = static_cast<Eigen::Index>(feature_tokens.front().size());
  Matrix x(n, f);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < f; ++j) {
      const std::string& t = feature_tokens[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      char* end = nullptr;
      x(i, j) = std::strtod(t.c_str(), &end);
      if (*end != '\0') throw UsageError("non-numeric feature '" + t + "' for node " + ids[static_cast<std::size_t>(i)]);
    }
  }

  std::optional<std::vector<int>> labels;
  std::set<std::string> class_names(classes.begin(), classes.end());
  if (has_labels) {
    std::map<std::string, int> class_index;
    for (const auto& c : class_names) class_index.emplace(c, static_cast<int>(class_index.size()));
    labels.emplace();
    for (const auto& c : classes) labels->push_back(class_index.at(c));
  }

  std::ifstream cites(cites_files.front());
  std::vector<Edge> edges;
  std::size_t skipped = 0;
  line_no = 0;
  while (std::getline(cites, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string a;
    std::string b;
    if (!(fields >> a)) continue;
    if (!(fields >> b)) {
      throw UsageError(cites_files.front().string() + ":" + std::to_string(line_no) +
                       ": expected two ids");
    }
    const auto ia = index.find(a);
    const auto ib = index.find(b);
    if (ia == index.end() || ib == index.end()) {
      ++skipped;
      continue;
    }
    edges.push_back({std::min(ia->second, ib->second), std::max(ia->second, ib->second)});
  }
  if (skipped > 0) err << "warning: skipped " << skipped << " citations to unknown node ids\n";

  AttributedGraph g(ids.size(), std::move(edges), std::move(x), labels);
  fs::create_directories(out_dir);
  write_graph(g, out_dir / "edges.txt", out_dir / "features.txt",
              labels ? std::optional<fs::path>(out_dir / "labels.txt") : std::nullopt);
  if (!labels) fs::remove(out_dir / "labels.txt");
  {
    std::string id_text;
    for (const auto& id : ids) id_text += id + "\n";
    write_text_file(out_dir / "node_ids.txt", id_text);
  }
  if (labels) {
    std::string class_text;
    for (const auto& c : class_names) class_text += c + "\n";
    write_text_file(out_dir / "classes.txt", class_text);
  }
  out << "nodes " << g.num_nodes() << "\nfeatures " << g.features().cols() << "\nedges "
      << g.num_edges() << "\nclasses " << (labels ? class_names.size() : 0) << "\n";
  return kOk;
}

// ------------------------------------------------------------------ train

struct SplitSettings {
  std::uint64_t seed = 0;
  double val_frac = 0.05;
  double test_frac = 0.10;
};

struct TrainRequest {
  TrainConfig cfg;
  DataPaths data;
  std::optional<SplitSettings> split;
  std::optional<ordered_json> expected_hashes;
};

ordered_json hashes_of(const DataPaths& p) {
  ordered_json h;
  h["edges"] = git_blob_hash_file(p.edges);
  h["features"] = git_blob_hash_file(p.features);
  h["labels"] = p.labels ? ordered_json(git_blob_hash_file(*p.labels)) : ordered_json(nullptr);
  return h;
}

ordered_json manifest_json(const TrainRequest& req, const ordered_json& hashes,
                           const AttributedGraph& g, const fs::path& out_dir) {
  ordered_json m;
  m["format"] = kManifestFormat;
  m["version"] = kManifestVersion;
  ordered_json config;
  for (const auto& [k, v] : to_key_values(req.cfg)) config[k] = v;
  m["config"] = config;
  m["config_hash"] = config_hash(req.cfg);
  m["seed"] = req.cfg.seed;
  m["dataset"] = req.data.name;
  m["data"] = {{"edges", req.data.edges.string()},
               {"features", req.data.features.string()},
               {"labels", req.data.labels ? ordered_json(req.data.labels->string())
                                          : ordered_json(nullptr)}};
  m["input_hashes"] = hashes;
  if (req.split) {
    m["split"] = {{"seed", req.split->seed},
                  {"val_frac", req.split->val_frac},
                  {"test_frac", req.split->test_frac}};
  } else {
    m["split"] = nullptr;
  }
  m["num_nodes"] = g.num_nodes();
  m["num_edges"] = g.num_edges();
  m["output_dir"] = fs::absolute(out_dir).lexically_normal().string();
  return m;
}

int cmd_train(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  const KeyValues overrides = take_overrides(args);

  CLI::App app{"Train an embedding model", "dmgae train"};
  std::string config_path;
  std::string manifest_path;
  std::string out_dir;
  std::optional<std::uint64_t> split_seed;
  SplitSettings split;
  DataOptions data;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--manifest", manifest_path, "Re-run from an existing manifest.json");
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--split-seed", split_seed, "Hide edges for link prediction with this seed");
  app.add_option("--val-frac", split.val_frac, "Validation edge fraction");
  app.add_option("--test-frac", split.test_frac, "Test edge fraction");
  data.add_to(&app);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kValidationError;
  }

  TrainRequest req;
  std::vector<std::string> problems;
  KeyValues values;
  if (!manifest_path.empty()) {
    const ordered_json m = read_manifest(manifest_path);
    for (const auto& [k, v] : m.at("config").items()) values[k] = v.get<std::string>();
    req.data.edges = m.at("data").at("edges").get<std::string>();
    req.data.features = m.at("data").at("features").get<std::string>();
    if (!m.at("data").at("labels").is_null()) req.data.labels = m.at("data").at("labels").get<std::string>();
    req.data.name = m.value("dataset", "");
    req.expected_hashes = m.at("input_hashes");
    if (!m.at("split").is_null()) {
      req.split = SplitSettings{m.at("split").at("seed").get<std::uint64_t>(),
                                m.at("split").at("val_frac").get<double>(),
                                m.at("split").at("test_frac").get<double>()};
    }
  }
  if (!config_path.empty()) {
    for (auto& [k, v] : read_key_value_file(config_path, problems)) values[k] = v;
  }
  for (const auto& [k, v] : overrides) values[k] = v;
  req.cfg = apply_overrides(values, TrainConfig{}, problems);
  for (auto& p : req.cfg.validate()) problems.push_back(std::move(p));
  if (data.given()) {
    req.data = data.resolve();
    req.expected_hashes.reset();
  } else if (manifest_path.empty()) {
    problems.push_back("input graph needs --data DIR or both --edges and --features");
  }
  if (split_seed) req.split = SplitSettings{*split_seed, split.val_frac, split.test_frac};
  if (req.split && (req.split->val_frac < 0.0 || req.split->test_frac < 0.0 ||
                    req.split->val_frac + req.split->test_frac >= 1.0)) {
    problems.push_back("split fractions must be >= 0 and sum to less than 1");
  }
  raise_problems(problems);

  AttributedGraph g = load(req.data);
  const ordered_json hashes = hashes_of(req.data);
  if (req.expected_hashes && *req.expected_hashes != hashes) {
    throw UsageError("input files differ from the manifest's recorded content hashes");
  }
  raise_problems(req.cfg.validate(g.num_nodes()));

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  if (req.split) {
    const EdgeSplit s = split_edges(g, req.split->val_frac, req.split->test_frac, req.split->seed);
    write_split(dir / "split.tsv", s);
    g = g.with_edges(s.train);
  }
  write_json(dir / "manifest.json", manifest_json(req, hashes, g, dir));

  Trainer trainer(g, req.cfg);
  std::ofstream log(dir / "train.log.jsonl", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + (dir / "train.log.jsonl").string());
  const auto start = std::chrono::steady_clock::now();
  try {
    if (req.cfg.manifold) trainer.precompute();
    for (int e = 0; e < req.cfg.epochs; ++e) {
      const LossReport report = trainer.train_epoch();
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log << loss_report_json(e, report, wall).dump() << '\n' << std::flush;
      if (req.cfg.checkpoint_every > 0 && (e + 1) % req.cfg.checkpoint_every == 0) {
        save_checkpoint(dir / "checkpoint", trainer.params());
      }
    }
  } catch (const TrainingError& e) {
    save_checkpoint(dir / "checkpoint", trainer.params());
    err << "error: " << e.what() << "\nlast good parameters saved to "
        << (dir / "checkpoint").string() << "\n";
    return kRuntimeFailure;
  }
  save_checkpoint(dir / "checkpoint", trainer.params());
  write_embeddings(dir / "embeddings.tsv", trainer.embedding());
  out << "trained " << req.cfg.epochs << " epochs on " << g.num_nodes() << " nodes; wrote "
      << (dir / "embeddings.tsv").string() << "\n";
  return kOk;
}

// ------------------------------------------------------------------- eval

struct EmbeddingSource {
  Matrix z;
  std::optional<ordered_json> manifest;
  fs::path run_dir;
};

EmbeddingSource from_run(const fs::path& dir) {
  EmbeddingSource s;
  s.run_dir = dir;
  s.manifest = read_manifest(dir / "manifest.json");
  if (!fs::exists(dir / "embeddings.tsv")) throw UsageError("run has no embeddings.tsv: " + dir.string());
  s.z = read_embeddings(dir / "embeddings.tsv");
  return s;
}

std::optional<fs::path> manifest_labels(const ordered_json& m) {
  const auto& l = m.at("data").at("labels");
  if (l.is_null()) return std::nullopt;
  return fs::path(l.get<std::string>());
}

void add_summary(ordered_json& doc, const std::vector<std::string>& metrics) {
  ordered_json mean;
  ordered_json stddev;
  const auto& entries = doc.at("seeds");
  for (const auto& name : metrics) {
    double sum = 0.0;
    for (const auto& e : entries) sum += e.at(name).get<double>();
    const double m = sum / static_cast<double>(entries.size());
    double var = 0.0;
    for (const auto& e : entries) var += std::pow(e.at(name).get<double>() - m, 2);
    mean[name] = m;
    stddev[name] = std::sqrt(var / static_cast<double>(entries.size()));
  }
  doc["mean"] = mean;
  doc["std"] = stddev;
}

int cmd_eval(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evaluate embeddings", "dmgae eval"};
  std::string task;
  std::vector<std::string> runs;
  std::string embeddings;
  std::string checkpoint;
  std::string labels_path;
  std::string split_path;
  std::string seeds_text = "0-9";
  std::string out_path;
  std::string dataset;
  bool normalize_features = false;
  DataOptions data;
  app.add_option("--task", task, "cluster or linkpred")->required()->check(CLI::IsMember({"cluster", "linkpred"}));
  app.add_option("--run", runs, "Training output directory (repeatable)");
  app.add_option("--embeddings", embeddings, "embeddings.tsv file");
  app.add_option("--checkpoint", checkpoint, "Checkpoint directory; needs the input graph");
  app.add_option("--split", split_path, "split.tsv for link prediction");
  app.add_option("--seeds", seeds_text, "K-means seeds, e.g. 0-9 or 1,4,7");
  app.add_option("--out", out_path, "Metrics JSON path");
  app.add_option("--dataset", dataset, "Dataset name recorded in the metrics");
  app.add_flag("--normalize-features", normalize_features, "Row-normalize features before encoding a checkpoint");
  data.add_to(&app);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kValidationError;
  }
  labels_path = data.labels;
  const int sources = (runs.empty() ? 0 : 1) + (embeddings.empty() ? 0 : 1) + (checkpoint.empty() ? 0 : 1);
  if (sources != 1) throw UsageError("give exactly one of --run, --embeddings, --checkpoint");
  const auto seeds = parse_seeds(seeds_text);

  std::vector<EmbeddingSource> inputs;
  for (const auto& r : runs) inputs.push_back(from_run(r));
  if (!embeddings.empty()) inputs.push_back({read_embeddings(embeddings), std::nullopt, {}});
  if (!checkpoint.empty()) {
    DataPaths p = data.resolve();
    p.labels.reset();
    AttributedGraph g = load(p);
    if (!split_path.empty()) g = g.with_edges(read_split(split_path).train);
    const ModelParams params = load_checkpoint(checkpoint);
    if (params.dims().input_dim != g.features().cols()) {
      throw UsageError("checkpoint input dimension does not match the feature file");
    }
    const Matrix x = normalize_features ? row_normalize_l2(g.features()) : g.features();
    inputs.push_back({encode(fc_forward(x, params), normalize_adjacency(adjacency(g)), params).mu,
                      std::nullopt, {}});
    if (dataset.empty()) dataset = p.name;
  }

  const ordered_json* first_manifest = inputs.front().manifest ? &*inputs.front().manifest : nullptr;
  if (dataset.empty()) dataset = first_manifest ? first_manifest->value("dataset", "") : "";
  ordered_json doc;
  doc["task"] = task;
  doc["dataset"] = dataset;
  doc["config_hash"] = first_manifest ? first_manifest->at("config_hash") : ordered_json(nullptr);
  doc["seeds"] = ordered_json::array();

  const auto entry = [&](std::uint64_t seed, const EmbeddingSource& src) {
    ordered_json e;
    e["task"] = task;
    e["dataset"] = dataset;
    e["seed"] = seed;
    e["acc"] = nullptr;
    e["nmi"] = nullptr;
    e["f1"] = nullptr;
    e["auc"] = nullptr;
    e["ap"] = nullptr;
    e["config_hash"] = src.manifest ? src.manifest->at("config_hash") : ordered_json(nullptr);
    if (!src.run_dir.empty()) e["run"] = src.run_dir.string();
    return e;
  };

  if (task == "cluster") {
    for (const auto& src : inputs) {
      std::optional<fs::path> lp;
      if (!labels_path.empty()) lp = fs::path(labels_path);
      else if (src.manifest) lp = manifest_labels(*src.manifest);
      if (!lp) throw UsageError("cluster task needs node labels (--labels)");
      const std::vector<int> truth = read_label_file(*lp);
      if (truth.size() != static_cast<std::size_t>(src.z.rows())) {
        throw UsageError("label count " + std::to_string(truth.size()) +
                         " does not match embedding rows " + std::to_string(src.z.rows()));
      }
      const int classes = static_cast<int>(std::set<int>(truth.begin(), truth.end()).size());
      if (classes < 2) throw UsageError("cluster task needs at least 2 classes");
      // Several runs: one entry per run, clustered with that run's seed.
      const std::vector<std::uint64_t> use =
          inputs.size() > 1 ? std::vector<std::uint64_t>{src.manifest->at("seed").get<std::uint64_t>()}
                            : seeds;
      for (const auto seed : use) {
        const KMeansResult km = kmeans(src.z, classes, seed);
        const ClusteringResult r = clustering_metrics(km.labels, truth);
        ordered_json e = entry(seed, src);
        e["acc"] = r.acc;
        e["nmi"] = r.nmi;
        e["f1"] = r.f1;
        doc["seeds"].push_back(e);
      }
    }
    add_summary(doc, {"acc", "nmi", "f1"});
  } else {
    for (const auto& src : inputs) {
      fs::path sp = split_path;
      if (sp.empty() && !src.run_dir.empty()) sp = src.run_dir / "split.tsv";
      if (sp.empty() || !fs::exists(sp)) {
        throw UsageError("linkpred task needs a split (--split, or a run trained with --split-seed)");
      }
      const EdgeSplit split = read_split(sp);
      for (const auto& edges : {split.test_pos, split.test_neg}) {
        for (const auto& ed : edges) {
          if (ed.u < 0 || ed.v < 0 || ed.u >= src.z.rows() || ed.v >= src.z.rows()) {
            throw UsageError("split references nodes beyond the embedding rows");
          }
        }
      }
      const LinkPredictionResult r = link_prediction_metrics(src.z, split);
      const std::uint64_t seed =
          src.manifest ? src.manifest->at("seed").get<std::uint64_t>() : seeds.front();
      ordered_json e = entry(seed, src);
      e["auc"] = r.auc;
      e["ap"] = r.ap;
      doc["seeds"].push_back(e);
    }
    add_summary(doc, {"auc", "ap"});
  }

  fs::path target = out_path;
  if (target.empty() && runs.size() == 1) target = fs::path(runs.front()) / "metrics.json";
  if (target.empty()) {
    out << doc.dump(2) << "\n";
  } else {
    write_json(target, doc);
    out << doc["mean"].dump() << "\n";
  }
  return kOk;
}

// ------------------------------------------------------------------- plot

int cmd_plot(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"2D projection of embeddings", "dmgae plot"};
  std::string run;
  std::string embeddings;
  std::string labels_path;
  std::string out_dir;
  app.add_option("--run", run, "Training output directory");
  app.add_option("--embeddings", embeddings, "embeddings.tsv file");
  app.add_option("--labels", labels_path, "Label file used for colors");
  app.add_option("--out", out_dir, "Directory for plot.csv and plot.svg");
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kValidationError;
  }
  if (run.empty() == embeddings.empty()) throw UsageError("give exactly one of --run, --embeddings");
  Matrix z;
  std::optional<fs::path> lp;
  if (!labels_path.empty()) lp = fs::path(labels_path);
  if (!run.empty()) {
    const EmbeddingSource src = from_run(run);
    z = src.z;
    if (!lp) lp = manifest_labels(*src.manifest);
    if (out_dir.empty()) out_dir = run;
  } else {
    z = read_embeddings(embeddings);
  }
  if (out_dir.empty()) throw UsageError("--out is required with --embeddings");
  std::optional<std::vector<int>> labels;
  if (lp) {
    labels = read_label_file(*lp);
    if (labels->size() != static_cast<std::size_t>(z.rows())) {
      throw UsageError("label count does not match embedding rows");
    }
  }
  const Projection proj = pca_2d(z);
  fs::create_directories(out_dir);
  write_scatter_csv(fs::path(out_dir) / "plot.csv", proj.coords, labels);
  write_scatter_svg(fs::path(out_dir) / "plot.svg", proj.coords, labels);
  out << "wrote " << (fs::path(out_dir) / "plot.svg").string() << "\n";
  if (labels && std::set<int>(labels->begin(), labels->end()).size() >= 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "separation_ratio %.6g\n", separation_ratio(proj.coords, *labels));
    out << buf;
  }
  return kOk;
}

// ------------------------------------------------------------- similarity

void write_matrix_tsv(const fs::path& path, const Matrix& m) {
  std::string text;
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), j == 0 ? "%.10g" : "\t%.10g", m(i, j));
      text += buf;
    }
    text += '\n';
  }
  write_text_file(path, text);
}

int cmd_similarity(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  const KeyValues overrides = take_overrides(args);
  CLI::App app{"Export input-space distance or similarity matrices", "dmgae similarity"};
  std::string config_path;
  std::string mode = "prior";
  std::string what = "similarity";
  std::string out_path;
  DataOptions data;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--mode", mode, "prior or complete graph")->check(CLI::IsMember({"prior", "complete"}));
  app.add_option("--matrix", what, "similarity, distance or preprocessed")
      ->check(CLI::IsMember({"similarity", "distance", "preprocessed"}));
  app.add_option("--out", out_path, "TSV output path")->required();
  data.add_to(&app);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kValidationError;
  }
  std::vector<std::string> problems;
  KeyValues values;
  if (!config_path.empty()) values = read_key_value_file(config_path, problems);
  for (const auto& [k, v] : overrides) values[k] = v;
  const TrainConfig cfg = apply_overrides(values, TrainConfig{}, problems);
  for (auto& p : cfg.validate()) problems.push_back(std::move(p));
  raise_problems(problems);

  AttributedGraph g = load(data.resolve());
  raise_problems(cfg.validate(g.num_nodes()));
  if (cfg.normalize_features) g = g.with_features(row_normalize_l2(g.features()));
  const GraphMode gm = mode == "prior" ? GraphMode::prior : GraphMode::complete;
  if (gm == GraphMode::prior && cfg.prior_graph == PriorGraph::knn) {
    g = g.with_edges(knn_graph(g.features(), static_cast<std::size_t>(cfg.knn_k)).edges());
  }
  Matrix m;
  std::size_t flagged = 0;
  if (what == "similarity") {
    const SimilarityResult r =
        similarity_pipeline(g, g.features(), gm, cfg.nu_input, cfg.perplexity, Space::input);
    m = r.p;
    flagged = static_cast<std::size_t>(std::count(r.flagged.begin(), r.flagged.end(), true));
  } else {
    const DistanceMatrix d = geodesic_distances(g, g.features(), gm);
    m = what == "distance" ? d.values : preprocess_distances(d).distances.values;
  }
  write_matrix_tsv(out_path, m);
  out << "wrote " << m.rows() << "x" << m.cols() << " " << what << " matrix to " << out_path << "\n";
  if (flagged > 0) err << "warning: " << flagged << " rows did not reach the perplexity target\n";
  return kOk;
}

const char* kUsage =
    "usage: dmgae <command> [options]\n"
    "commands:\n"
    "  convert     convert a planetoid (LINQS) dataset to the canonical files\n"
    "  train       train a model and write embeddings\n"
    "  eval        clustering or link-prediction metrics\n"
    "  plot        2D PCA scatter (CSV and SVG)\n"
    "  similarity  export input-space distances or similarities\n"
    "Run 'dmgae <command> --help' for options.\n";

int cmd_convert(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Convert a dataset to edges.txt/features.txt/labels.txt", "dmgae convert"};
  std::string input;
  std::string format = "planetoid";
  std::string out_dir;
  app.add_option("--input", input, "Source dataset directory")->required();
  app.add_option("--format", format, "Source layout")->check(CLI::IsMember({"planetoid"}));
  app.add_option("--out", out_dir, "Output directory")->required();
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kValidationError;
  }
  return convert_planetoid(input, out_dir, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args.front() == "--help" || args.front() == "-h") {
    (args.empty() ? err : out) << kUsage;
    return args.empty() ? kValidationError : kOk;
  }
  const std::string command = args.front();
  std::vector<std::string> rest(args.begin() + 1, args.end());
  try {
    if (command == "convert") return cmd_convert(rest, out, err);
    if (command == "train") return cmd_train(rest, out, err);
    if (command == "eval") return cmd_eval(rest, out, err);
    if (command == "plot") return cmd_plot(rest, out, err);
    if (command == "similarity") return cmd_similarity(rest, out, err);
    err << "unknown command '" << command << "'\n" << kUsage;
    return kValidationError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const GraphError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const EvaluationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

}  // namespace dmgae::cli
