// Cyclic adversarial post-specialisation: generators G (plain -> specialised)
// and F (specialised -> plain) trained on constraint-seen words with a
// max-margin ranking loss over random confounders, cycle-reconstruction
// distances and adversarial feedback from two discriminators; G is then
// applied to the whole vocabulary.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sexwes/embedding.hpp"
#include "sexwes/linalg.hpp"
#include "sexwes/mlp.hpp"
#include "sexwes/rng.hpp"

namespace sexwes {

struct PostSpecConfig {
  int hidden_layers = 2;
  int hidden_units = 2048;
  double generator_dropout = 0.2;
  double discriminator_dropout = 0.3;
  double margin = 1.0;       // delta_MM
  int confounders = 25;      // negative samples per item
  double learning_rate = 0.1;  // published value; drop to ~1e-3 if diverging
  int epochs = 10;
  int batch_size = 32;
  double w_mm = 1.0;
  double w_cycle = 1.0;
  double w_adv = 1.0;
  std::uint64_t seed = 1;
  // The printed margin loss feeds F with the plain vector; the
  // type-consistent alternative feeds F(x') instead.
  bool literal_margin_inputs = true;
  bool least_squares_adv = false;  // default cross-entropy
  bool splice_seen = false;  // ablation: keep AR rows for seen words on apply
};

struct MappingModel {
  Mlp g, f, d_spec, d_plain;
  std::size_t dim = 0;
  PostSpecConfig config_echo;

  void save(const std::string& path) const;
  static MappingModel load(const std::string& path);
};

MappingModel init_mapping(std::size_t dim, const PostSpecConfig& cfg);

// Max-margin ranking loss, summed over items, confounders and the four
// mapped outputs: T(margin - cos(out, gold_i) + cos(out, conf_ij)).
double mm_loss(const std::vector<Vec>& g_out, const std::vector<Vec>& f_out,
               const std::vector<Vec>& cycle_gf_out,
               const std::vector<Vec>& cycle_fg_out,
               const std::vector<Vec>& gold,
               const std::vector<std::vector<Vec>>& confounders, double margin);

// One training batch: plain vectors, their gold specialised vectors and the
// per-item confounder vectors (gold vectors of other words).
struct PostSpecBatch {
  std::vector<Vec> plain;
  std::vector<Vec> gold;
  std::vector<std::vector<Vec>> confounders;
};

struct GeneratorLossParts {
  double total = 0.0;
  double mm = 0.0;     // raw margin-loss sum over the batch
  double cycle = 0.0;
  double adv = 0.0;
};

// Generator objective (mean over items of w_mm*mm + w_cycle*cycle +
// w_adv*adv) with analytic gradients for G and F; discriminators are frozen
// inputs here. Gradient buffers are overwritten; null pointers skip the
// backward pass.
GeneratorLossParts generator_loss(const MappingModel& model,
                                  const PostSpecBatch& batch,
                                  const PostSpecConfig& cfg, Vec* g_grads,
                                  Vec* f_grads, Rng* dropout_rng = nullptr);

struct DiscriminatorLossParts {
  double total = 0.0;
  double d_spec = 0.0;
  double d_plain = 0.0;
};

DiscriminatorLossParts discriminator_loss(const MappingModel& model,
                                          const PostSpecBatch& batch,
                                          const PostSpecConfig& cfg,
                                          Vec* d_spec_grads, Vec* d_plain_grads,
                                          Rng* dropout_rng = nullptr);

struct PostSpecTrainStats {
  std::size_t seen_train = 0;
  std::size_t seen_heldout = 0;
  int best_epoch = -1;
  double best_heldout_mm = 0.0;
  double initial_heldout_mm = 0.0;
  std::vector<std::string> heldout_words;
  // per epoch: mm, cycle, adv, disc means over batches
  std::vector<std::vector<double>> epoch_losses;
};

// Trains on the seen words (present in both spaces); returns the best model
// by held-out margin loss on a 10% split.
MappingModel train_postspec(const EmbeddingSpace& plain,
                            const EmbeddingSpace& ar_specialised,
                            const std::vector<std::string>& seen,
                            const PostSpecConfig& cfg,
                            PostSpecTrainStats* stats = nullptr,
                            const std::string& log_csv_path = "");

// Replaces every row by G(row); vocabulary and order are unchanged. With
// splice_seen the given seen words keep their vectors from spliced_source.
EmbeddingSpace apply_mapping(const MappingModel& model,
                             const EmbeddingSpace& space,
                             const std::vector<std::string>* splice_seen_words = nullptr,
                             const EmbeddingSpace* splice_source = nullptr);

}  // namespace sexwes
