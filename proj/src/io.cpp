#include "dmgae/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace dmgae {

namespace {

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_embeddings(const std::filesystem::path& path, const Matrix& z) {
  std::string text = kEmbeddingsHeader;
  text += '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    text += std::to_string(i);
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "\t%.8g", z(i, j));
      text += buf;
    }
    text += '\n';
  }
  write_text_file(path, text);
}

Matrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kEmbeddingsHeader) {
    throw FormatError(path.string() + ": missing or unsupported header (expected '" +
                      kEmbeddingsHeader + "')");
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    std::istringstream fields(line);
    long id = -1;
    if (!(fields >> id) || id != static_cast<long>(rows.size())) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected node id " +
                        std::to_string(rows.size()));
    }
    std::vector<double> row;
    double v = 0.0;
    while (fields >> v) row.push_back(v);
    if (!fields.eof()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad value");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  const Eigen::Index d = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
  Matrix z(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z(static_cast<Eigen::Index>(i), j) = rows[i][j];
  }
  return z;
}

std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
  return git_blob_hash(read_text_file(path));
}

nlohmann::ordered_json loss_report_json(int epoch, const LossReport& report, double wall_time) {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["recon"] = report.recon;
  if (report.kl) j["kl"] = *report.kl;
  j["manifold_prior"] = report.manifold_prior;
  j["manifold_complete"] = report.manifold_complete;
  j["total"] = report.total;
  j["alpha"] = report.alpha;
  j["beta"] = report.beta;
  j["wall_time"] = wall_time;
  return j;
}

void write_split(const std::filesystem::path& path, const EdgeSplit& split) {
  std::string text = kSplitHeader;
  text += '\n';
  const auto emit = [&](const char* kind, const std::vector<Edge>& edges) {
    for (const auto& e : edges) {
      text += kind;
      text += '\t' + std::to_string(e.u) + '\t' + std::to_string(e.v) + '\n';
    }
  };
  emit("train", split.train);
  emit("val_pos", split.val_pos);
  emit("val_neg", split.val_neg);
  emit("test_pos", split.test_pos);
  emit("test_neg", split.test_neg);
  write_text_file(path, text);
}

EdgeSplit read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSplitHeader) {
    throw FormatError(path.string() + ": missing or unsupported header (expected '" +
                      kSplitHeader + "')");
  }
  EdgeSplit split;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    std::istringstream fields(line);
    std::string kind;
    Edge e;
    if (!(fields >> kind >> e.u >> e.v)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected kind u v");
    }
    if (kind == "train") split.train.push_back(e);
    else if (kind == "val_pos") split.val_pos.push_back(e);
    else if (kind == "val_neg") split.val_neg.push_back(e);
    else if (kind == "test_pos") split.test_pos.push_back(e);
    else if (kind == "test_neg") split.test_neg.push_back(e);
    else throw FormatError(path.string() + ":" + std::to_string(line_no) + ": unknown kind " + kind);
  }
  return split;
}

}  // namespace dmgae
