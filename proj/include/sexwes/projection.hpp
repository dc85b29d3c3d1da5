// Cross-lingual projection: RCSLS training of the linear source-to-target
// map from a seed dictionary, CSLS-scored retrieval, and projection of
// source-language constraint sets into target-language candidates.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sexwes/constraints.hpp"
#include "sexwes/embedding.hpp"
#include "sexwes/linalg.hpp"

namespace sexwes {

struct ProjectionConfig {
  int k_neighbors = 10;
  int iterations = 10;          // full passes over the seed dictionary
  double learning_rate = 1.0;   // halved whenever a step lowers the objective
  int batch_size = 0;           // 0 = full batch
  std::uint64_t seed = 1;
  bool csls_retrieval = true;   // false = plain cosine retrieval
};

struct ProjectionMatrix {
  Mat w;  // tgt_dim x src_dim; projects source rows into the target space
  std::size_t src_dim() const { return w.cols; }
  std::size_t tgt_dim() const { return w.rows; }
};

void save_projection(const ProjectionMatrix& p, const std::string& path);
ProjectionMatrix load_projection(const std::string& path);

// Seed dictionary file: "src_word<TAB>tgt_word" per line.
std::vector<std::pair<std::string, std::string>> load_seed_dictionary(
    const std::string& path);

struct RcslsTrainStats {
  std::size_t pairs_resolved = 0;
  std::size_t pairs_skipped = 0;
  std::vector<double> objective_per_iteration;  // includes the initial value
  double best_objective = 0.0;
};

// Maximises, over dictionary pairs (x, y), the criterion
//   2 cos(Wx, y) - mean_k cos(Wx, nn_tgt(Wx)) - mean_k cos(W nn_src(y), y)
// by gradient ascent from the orthogonal Procrustes solution. The best W by
// objective value is retained, so the reported objective never decreases.
ProjectionMatrix train_rcsls(
    const EmbeddingSpace& src, const EmbeddingSpace& tgt,
    const std::vector<std::pair<std::string, std::string>>& seed_dict,
    const ProjectionConfig& cfg, RcslsTrainStats* stats = nullptr);

// CSLS similarity given precomputed neighborhood means.
inline double csls_score(double cos_xy, double mean_nn_sim_x,
                         double mean_nn_sim_y) {
  return 2.0 * cos_xy - mean_nn_sim_x - mean_nn_sim_y;
}

// Precomputed target-side neighborhood penalties for CSLS retrieval of
// projected source queries against the full target vocabulary.
struct CslsContext {
  const EmbeddingSpace* tgt = nullptr;
  Vec tgt_unit;        // unit-normalized target rows, row-major
  Vec tgt_penalty;     // per target word: mean cos to its k nearest projected source rows
  int k = 10;

  static CslsContext build(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                           const ProjectionMatrix& w, int k_neighbors);

  // CSLS scores of a projected query against every target word.
  Vec score_all(std::span<const double> projected_query) const;
};

struct Translation {
  std::string word;
  double score;
};

// Translates one source term: single tokens are looked up directly, phrases
// averaged via phrase_vector; returns the best target word under CSLS (or
// cosine when csls_retrieval is off). nullopt when no token resolves.
std::optional<Translation> translate_term(const TaggedTerm& term,
                                          const ProjectionMatrix& w,
                                          const EmbeddingSpace& src,
                                          const EmbeddingSpace& tgt,
                                          const ProjectionConfig& cfg,
                                          const CslsContext* ctx = nullptr);

struct ProjectStats {
  std::size_t dropped_unresolvable = 0;
  std::size_t dropped_self = 0;
  std::size_t dropped_phrase = 0;   // only when phrase_level is off
  std::size_t duplicates_merged = 0;
};

// Projects a monolingual source constraint set into target-language
// candidates, termwise. With phrase_level off, pairs containing any
// multi-token term are dropped.
ConstraintSet project_constraints(const ConstraintSet& c_src,
                                  const ProjectionMatrix& w,
                                  const EmbeddingSpace& src,
                                  const EmbeddingSpace& tgt,
                                  const ProjectionConfig& cfg,
                                  bool phrase_level,
                                  const LangConfig& langs = {},
                                  ProjectStats* stats = nullptr);

}  // namespace sexwes
