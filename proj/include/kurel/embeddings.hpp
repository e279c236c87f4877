#pragma once

// Word vectors: skip-gram with negative sampling, the plain-text vector
// format, and term relation matrices for soft-cosine.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kurel/common.hpp"

namespace kurel::embeddings {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> vocabulary, RowMatrixF vectors);

  std::size_t size() const { return vocabulary_.size(); }
  int dim() const { return static_cast<int>(vectors_.cols()); }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const RowMatrixF& vectors() const { return vectors_; }
  std::optional<std::size_t> find(std::string_view term) const;
  Eigen::Map<const Eigen::VectorXf> row(std::size_t i) const {
    return {vectors_.row(static_cast<Eigen::Index>(i)).data(), vectors_.cols()};
  }

  bool operator==(const EmbeddingTable& other) const {
    return vocabulary_ == other.vocabulary_ && vectors_ == other.vectors_;
  }

 private:
  std::vector<std::string> vocabulary_;
  RowMatrixF vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct SkipGramOptions {
  int dim = 200;
  int min_count = 20;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  float learning_rate = 0.025f;
  std::uint64_t seed = 1;
  /// 1 = deterministic reference mode. More workers train lock-free in
  /// parallel and give up bit-reproducibility.
  int workers = 1;
};

EmbeddingTable train_skipgram(const std::vector<std::vector<std::string>>& corpus, const SkipGramOptions& options);

/// Text format: optional "count dim" header, then "term v1 ... vd" per line.
EmbeddingTable load_vectors(const std::filesystem::path& path);
void save_vectors(const EmbeddingTable& table, const std::filesystem::path& path);

int levenshtein(std::string_view a, std::string_view b);

/// Sparse symmetric term relation weights with an implicit unit diagonal.
class RelationMatrix {
 public:
  RelationMatrix() = default;
  explicit RelationMatrix(std::vector<std::string> vocabulary, double threshold = 0.0);

  /// Identity relation over an empty vocabulary: every term relates only to itself.
  static RelationMatrix identity() { return RelationMatrix{}; }

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  std::optional<std::size_t> find(std::string_view term) const;
  double threshold() const { return threshold_; }

  /// Stores m_ij = m_ji; requires i != j and weight in (0, 1].
  void set(std::size_t i, std::size_t j, double weight);
  double weight(std::size_t i, std::size_t j) const;
  double weight(std::string_view a, std::string_view b) const;
  /// Off-diagonal neighbours of row i, sorted by column.
  const std::vector<std::pair<std::uint32_t, double>>& row(std::size_t i) const { return rows_[i]; }
  std::size_t nonzeros() const;  // off-diagonal entries with i < j
  std::uint64_t vocabulary_hash() const;

  /// Header (magic, vocab hash, threshold, vocabulary) then sorted (i, j, w) triples, i < j.
  void save(const std::filesystem::path& path) const;
  static RelationMatrix load(const std::filesystem::path& path);

  bool operator==(const RelationMatrix& other) const {
    return vocabulary_ == other.vocabulary_ && threshold_ == other.threshold_ && rows_ == other.rows_;
  }

 private:
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows_;
  double threshold_ = 0.0;
};

/// m_ij = max(0, cos(v_i, v_j))^2, kept when >= threshold. Terms missing
/// from the table keep only their diagonal. `workers` parallelises over row blocks.
RelationMatrix build_relation_matrix_embedding(const EmbeddingTable& table, const std::vector<std::string>& vocab,
                                               double threshold, int workers = 1);

/// m_ij = (1 - lev(t_i, t_j) / max(|t_i|, |t_j|))^2, kept when >= threshold.
RelationMatrix build_relation_matrix_levenshtein(const std::vector<std::string>& vocab, double threshold,
                                                 int workers = 1);

}  // namespace kurel::embeddings
