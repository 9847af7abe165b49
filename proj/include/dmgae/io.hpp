#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dmgae/evaluation.hpp"
#include "dmgae/graph.hpp"
#include "dmgae/objective.hpp"

namespace dmgae {

inline constexpr const char* kEmbeddingsHeader = "# dmgae-embeddings v1";
inline constexpr const char* kSplitHeader = "# dmgae-split v1";
inline constexpr const char* kManifestFormat = "dmgae-run";
inline constexpr int kManifestVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Header line, then "<node id>\t<v0>\t<v1>..." per node with %.8g values.
void write_embeddings(const std::filesystem::path& path, const Matrix& z);
Matrix read_embeddings(const std::filesystem::path& path);

// Hex SHA-1 of "blob <size>\0<content>", the object id git assigns a file.
std::string git_blob_hash(const std::string& content);
std::string git_blob_hash_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

nlohmann::ordered_json loss_report_json(int epoch, const LossReport& report, double wall_time);

// Header line, then "<kind>\t<u>\t<v>" rows with kind in
// train, val_pos, val_neg, test_pos, test_neg.
void write_split(const std::filesystem::path& path, const EdgeSplit& split);
EdgeSplit read_split(const std::filesystem::path& path);

}  // namespace dmgae
