// Word embedding storage: loading/saving the word2vec text format, unit
// normalization, cosine queries, ranked nearest-neighbour retrieval and
// phrase vectors by token averaging.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sexwes/linalg.hpp"

namespace sexwes {

// Immutable after construction; rows are indexed by insertion order.
struct EmbeddingSpace {
  std::vector<std::string> words;
  Vec data;  // row-major, words.size() x dim
  std::size_t dim = 0;
  std::unordered_map<std::string, std::size_t> index;
  bool mapping_applied = false;  // set once a post-specialisation map ran over it

  std::size_t size() const { return words.size(); }

  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * dim, dim};
  }
  std::span<double> row_mut(std::size_t r) { return {data.data() + r * dim, dim}; }

  std::optional<std::size_t> find(const std::string& word) const {
    auto it = index.find(word);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const std::string& word) const { return index.count(word) > 0; }

  // Appends a row; used by loaders and fixture builders only.
  void add(const std::string& word, std::span<const double> v);
};

struct EmbeddingLoadStats {
  std::size_t duplicates_skipped = 0;
  std::size_t rows_read = 0;
};

// Text format: header "N D", then one "word c1 ... cD" row per line.
// limit == 0 means no limit. Malformed rows, non-finite coordinates and zero
// vectors are rejected with the offending line number.
EmbeddingSpace load_embeddings(const std::string& path, std::size_t limit = 0,
                               EmbeddingLoadStats* stats = nullptr);

void save_embeddings(const EmbeddingSpace& space, const std::string& path);

// Returns a copy with every row scaled to unit Euclidean norm.
EmbeddingSpace unit_normalize(const EmbeddingSpace& space);

// Cosine between two in-vocabulary words; throws on OOV.
double cosine(const EmbeddingSpace& space, const std::string& w1,
              const std::string& w2);

struct ScoredWord {
  std::size_t row;
  double score;
};

// Top-k rows by cosine against the query, ties broken by ascending row index.
std::vector<ScoredWord> nearest_neighbors(const EmbeddingSpace& space,
                                          std::span<const double> query,
                                          std::size_t k);

// Ranks an externally computed per-row score vector with the same ordering
// contract; used for CSLS retrieval.
std::vector<ScoredWord> rank_scores(std::span<const double> scores,
                                    std::size_t k);

// Arithmetic mean over in-vocabulary tokens; OOV tokens are skipped and
// counted. Throws when no token resolves.
Vec phrase_vector(const EmbeddingSpace& space,
                  const std::vector<std::string>& tokens,
                  std::size_t* oov_count = nullptr);

// Splits a constraint surface into tokens on spaces and underscores.
std::vector<std::string> tokenize_surface(const std::string& surface);

}  // namespace sexwes
