// Intrinsic and extrinsic evaluation: Spearman word-similarity scoring with
// coverage accounting, a stratified dataset splitter, averaged-embedding
// text features with greedy longest-match segmentation, a logistic proxy
// classifier, cluster tightness reports and an exact 2-D stochastic
// neighbor embedding for visual export.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sexwes/embedding.hpp"
#include "sexwes/linalg.hpp"

namespace sexwes {

// ---- word similarity ------------------------------------------------------

// Pearson correlation of mean-of-ties average ranks. Throws when either
// side has zero rank variance or fewer than two entries.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct SimilarityBenchmark {
  std::string name;
  struct Entry {
    std::string word1, word2;
    double gold;
  };
  std::vector<Entry> entries;
};

// TSV: "word1<TAB>word2<TAB>score"; '#' comments.
SimilarityBenchmark load_benchmark(const std::string& path,
                                   const std::string& name);

struct SimilarityReport {
  std::string name;
  double rho = 0.0;
  std::size_t covered_pairs = 0;
  std::size_t total_pairs = 0;
};

SimilarityReport eval_word_similarity(const EmbeddingSpace& space,
                                      const SimilarityBenchmark& bench);

// ---- labeled dataset ------------------------------------------------------

enum class Label { Sexist, NonSexist };

struct Record {
  std::string text;
  Label label = Label::NonSexist;
  int split = -1;  // 0 train, 1 validation, 2 test
};

struct LabeledDataset {
  std::vector<Record> records;

  std::vector<std::size_t> split_indices(int split) const;
  std::array<std::size_t, 3> split_sizes() const;
};

// TSV: "label<TAB>text" with label "sexist" or "non-sexist".
LabeledDataset load_dataset(const std::string& path);

// Stratified per label with largest-remainder rounding; deterministic given
// seed. Throws when a positive-ratio split receives zero members of a
// present class.
void split_dataset(LabeledDataset& data, double train_ratio, double val_ratio,
                   double test_ratio, std::uint64_t seed);

// ---- text embedding -------------------------------------------------------

// Greedy longest-match segmentation against the vocabulary with single
// code-point fallback; operates on UTF-8 code points, skipping ASCII spaces.
std::vector<std::string> segment_greedy(const EmbeddingSpace& space,
                                        const std::string& text);

// Mean of in-vocabulary token vectors; all-OOV inputs give the zero vector
// and set the flag.
Vec embed_tokens(const EmbeddingSpace& space,
                 const std::vector<std::string>& tokens, bool* all_oov = nullptr);

// Raw text: whitespace-separated input is treated as pre-tokenized,
// otherwise segmented greedily.
Vec embed_text(const EmbeddingSpace& space, const std::string& text,
               bool* all_oov = nullptr);

// ---- proxy classifier -----------------------------------------------------

struct LinearModel {
  Vec weights;
  double bias = 0.0;

  // probability of the Sexist class
  double predict_proba(std::span<const double> features) const;
};

struct ClassificationReport {
  double f1_sexist = 0.0;
  double f1_nonsexist = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

ClassificationReport classification_metrics(const std::vector<Label>& gold,
                                            const std::vector<Label>& predicted);

struct ClassifierTrainStats {
  int best_epoch = -1;
  double best_val_macro_f1 = 0.0;
};

// Logistic regression on averaged-embedding features, full-batch gradient
// descent; the best epoch by validation macro-F1 is returned.
LinearModel train_proxy_classifier(const EmbeddingSpace& space,
                                   const LabeledDataset& data, int epochs,
                                   double learning_rate, std::uint64_t seed,
                                   ClassifierTrainStats* stats = nullptr);

ClassificationReport eval_classifier(const LinearModel& model,
                                     const EmbeddingSpace& space,
                                     const LabeledDataset& data);

struct SeedStudy {
  std::vector<ClassificationReport> per_seed;
  double mean_macro_f1 = 0.0, std_macro_f1 = 0.0;
  double mean_accuracy = 0.0, std_accuracy = 0.0;
};

// Re-trains with derived seeds (base_seed + run index); splits stay fixed.
SeedStudy classifier_seed_study(const EmbeddingSpace& space,
                                const LabeledDataset& data, int epochs,
                                double learning_rate, std::uint64_t base_seed,
                                int runs);

// ---- cluster analysis -----------------------------------------------------

struct ClusterReport {
  struct SeedCluster {
    std::string seed;
    std::vector<std::string> neighbors;
    double local_dist = 0.0;  // mean (1 - cos) between seed and neighbors
  };
  std::vector<SeedCluster> clusters;
  double overall_local_dist = 0.0;
  // deduplicated point set for plotting: (word, cluster index)
  std::vector<std::pair<std::string, std::size_t>> points;
  std::size_t overlap_count = 0;
};

// Neighbors are fixed once from neighbor_source; distances are measured in
// `space`. Seeds must exist in both spaces.
ClusterReport cluster_report(const EmbeddingSpace& space,
                             const std::vector<std::string>& seeds,
                             std::size_t k,
                             const EmbeddingSpace& neighbor_source);

// ---- 2-D projection -------------------------------------------------------

struct TsneConfig {
  double perplexity = 15.0;
  int iterations = 500;
  std::uint64_t seed = 1;
  double learning_rate = 0.0;  // 0 = auto: max(n/12, 10)
  double early_exaggeration = 4.0;
  int exaggeration_iters = 100;
};

// Exact (non-approximate) stochastic neighbor embedding to 2-D. The
// best-divergence iterate is returned, so final_kl never exceeds the
// initial divergence.
std::vector<std::array<double, 2>> project_2d(const std::vector<Vec>& vectors,
                                              const TsneConfig& cfg,
                                              double* final_kl = nullptr,
                                              double* initial_kl = nullptr);

}  // namespace sexwes
