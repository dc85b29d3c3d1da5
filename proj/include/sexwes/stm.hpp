// Binary Specialisation Tensor Model instances (Ga, Gr, Da, Dr, Dcl): a
// word-pair scorer with K specialised projections, bilinear slice scores and
// a sigmoid output, trained with binary cross-entropy to keep or drop
// projected constraint candidates.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sexwes/constraints.hpp"
#include "sexwes/embedding.hpp"
#include "sexwes/projection.hpp"
#include "sexwes/rng.hpp"

namespace sexwes {

struct StmConfig {
  int num_tensors = 5;
  int hidden_size = 300;
  double dropout = 0.5;
  int batch_size = 32;
  int max_iterations = 10;
  double learning_rate = 0.0001;
  double threshold = 0.5;
  std::uint64_t seed = 1;
  bool symmetrize = true;
};

enum class StmKind { Ga, Gr, Da, Dr, Dcl };
const char* to_string(StmKind k);

// Resolves tagged terms to vectors living in one shared space: target terms
// come straight from the target space, source terms are projected through W.
// Every embedded vector is unit-normalized.
struct PairEmbedder {
  const EmbeddingSpace* tgt = nullptr;
  const EmbeddingSpace* src = nullptr;        // optional
  const ProjectionMatrix* projection = nullptr;  // required with src
  LangConfig langs;

  std::size_t dim() const { return tgt->dim; }
  std::optional<Vec> embed(const TaggedTerm& term) const;
  // Uniform random in-vocabulary single word of the given language.
  TaggedTerm random_term(Rng& rng, const std::string& lang) const;
};

struct StmModel {
  int num_tensors = 0;
  std::size_t dim = 0;
  std::size_t hidden = 0;
  bool symmetrize = true;
  StmKind kind = StmKind::Da;
  StmConfig config_echo;
  Vec params;  // [P_0..P_{K-1} | B_0..B_{K-1} | w | bias]

  std::size_t proj_size() const { return dim * hidden; }
  std::size_t bilinear_size() const { return hidden * hidden; }
  std::size_t param_count() const {
    return static_cast<std::size_t>(num_tensors) * (proj_size() + bilinear_size()) +
           num_tensors + 1;
  }
  std::span<const double> proj(int k) const {
    return {params.data() + static_cast<std::size_t>(k) * proj_size(), proj_size()};
  }
  std::span<const double> bilinear(int k) const {
    return {params.data() + static_cast<std::size_t>(num_tensors) * proj_size() +
                static_cast<std::size_t>(k) * bilinear_size(),
            bilinear_size()};
  }
  std::span<const double> out_weights() const {
    return {params.data() + static_cast<std::size_t>(num_tensors) *
                                (proj_size() + bilinear_size()),
            static_cast<std::size_t>(num_tensors)};
  }
  double bias() const { return params.back(); }

  // Probability in (0, 1) that the pair realizes the modeled relation;
  // averaged over both orderings when symmetrize is on.
  double score_pair(std::span<const double> a, std::span<const double> b) const;

  void save(const std::string& path) const;
  static StmModel load(const std::string& path);
};

StmModel init_stm(std::size_t dim, const StmConfig& cfg, StmKind kind);

struct StmExample {
  Vec a, b;
  double label;  // 1 = valid relation instance
};

// Mean binary cross-entropy over the batch, dropout off.
double stm_batch_loss(const StmModel& model, std::span<const StmExample> batch);

// Same loss; accumulates d(loss)/d(params) into grads (sized param_count).
// When dropout_rng is non-null, hidden activations are dropped at the given
// rate with inverted scaling.
double stm_batch_loss_and_grads(const StmModel& model,
                                std::span<const StmExample> batch, Vec& grads,
                                Rng* dropout_rng = nullptr,
                                double dropout = 0.0);

struct StmTrainStats {
  std::size_t positives_resolved = 0;
  std::size_t positives_skipped = 0;
  std::size_t negatives_confusion = 0;
  std::size_t negatives_random = 0;
  double heldout_accuracy = 0.0;
  int best_epoch = -1;
  std::vector<double> heldout_accuracy_per_epoch;
};

// Trains one STM instance. explicit_negatives, when given, is used verbatim
// as the label-0 set. Otherwise negatives are generated to match the
// positive count: half drawn from confusion_pool (the opposite-relation
// set) when available, the rest random word pairs from the embedder.
StmModel train_stm(const ConstraintSet& positives,
                   const ConstraintSet* explicit_negatives,
                   const ConstraintSet* confusion_pool,
                   const PairEmbedder& embedder, const StmConfig& cfg,
                   StmKind kind, StmTrainStats* stats = nullptr);

struct FilterResult {
  ConstraintSet kept;
  std::size_t dropped_below_threshold = 0;
  std::size_t dropped_unresolvable = 0;
};

FilterResult filter_constraints(const StmModel& model,
                                const ConstraintSet& candidates,
                                const PairEmbedder& embedder, double threshold);

}  // namespace sexwes
