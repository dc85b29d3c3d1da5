// Initial specialisation of the target space on constraint-seen words:
// mini-batch hinge losses pull ATTRACT pairs above their negative examples
// and push REPEL pairs below theirs, with a squared-distance regularizer
// toward the starting vectors, optimized by per-coordinate Adagrad.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sexwes/constraints.hpp"
#include "sexwes/embedding.hpp"
#include "sexwes/linalg.hpp"
#include "sexwes/rng.hpp"

namespace sexwes {

struct ArConfig {
  double attract_margin = 0.6;
  double repel_margin = 0.0;
  double reg_lambda = 1e-9;
  double learning_rate = 0.05;  // Adagrad
  int batch_size = 50;
  int epochs = 5;
  std::uint64_t seed = 1;
};

using IndexPairList = std::vector<std::pair<std::size_t, std::size_t>>;

struct ArBatch {
  IndexPairList attract;
  IndexPairList repel;
  IndexPairList attract_neg;  // (t_a, t_b) per attract pair
  IndexPairList repel_neg;
};

// Picks one negative pair (t_a, t_b) per batch pair. A seeded half of the
// batch takes similarity-based negatives: among the other pairs' words, the
// one nearest to x_a (farthest for REPEL) becomes t_a, likewise t_b. The
// rest draw uniformly from those words. When a pair has no in-batch
// candidates, negatives come from fallback_pool instead. Negatives never
// equal either member of their own pair.
IndexPairList select_negatives(const IndexPairList& batch_pairs,
                               const Mat& vectors, Relation relation,
                               const std::vector<std::size_t>& fallback_pool,
                               Rng& rng,
                               std::vector<bool>* similarity_based = nullptr);

struct ArLossParts {
  double total = 0.0;
  double attract = 0.0;
  double repel = 0.0;
  double regularize = 0.0;
};

ArLossParts ar_loss(const ArBatch& batch, const Mat& current,
                    const Mat& initial, const ArConfig& cfg);

// Accumulates d(total)/d(row) for every row touched by the batch.
void ar_loss_grads(const ArBatch& batch, const Mat& current, const Mat& initial,
                   const ArConfig& cfg, std::map<std::size_t, Vec>& grads);

struct ArTrainStats {
  std::size_t attract_pairs = 0;
  std::size_t repel_pairs = 0;
  std::size_t pairs_skipped = 0;  // OOV or phrase terms
  // per epoch: attract, repel, regularize totals at batch-start values
  std::vector<ArLossParts> epoch_losses;
};

// Returns the specialised copy of the space. Only words appearing in a batch
// (pair members and negatives) are updated; everything else stays
// bit-identical. The input space doubles as the regularizer reference.
EmbeddingSpace specialise(const EmbeddingSpace& space,
                          const ConstraintSet& attract,
                          const ConstraintSet& repel, const ArConfig& cfg,
                          ArTrainStats* stats = nullptr,
                          const std::string& log_csv_path = "");

}  // namespace sexwes
