// End-to-end orchestration: a flat key/value config, file-driven stages
// (projection -> refinement -> initial specialisation -> post-specialisation
// -> evaluation) with per-stage derived seeds, and a JSON run manifest.
// Every stage reads and writes artifacts under the output directory, so a
// full run and a chain of single-stage invocations produce identical bytes.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sexwes/attract_repel.hpp"
#include "sexwes/evaluation.hpp"
#include "sexwes/postspec.hpp"
#include "sexwes/projection.hpp"
#include "sexwes/stm.hpp"

namespace sexwes {

inline constexpr const char* kToolVersion = "0.1.0";

enum class ConstraintSelection { General, Domain, Both };

struct PipelineConfig {
  // inputs
  std::string source_embeddings;
  std::string target_embeddings;
  std::string seed_dictionary;
  std::size_t source_vocab_limit = 0;
  std::size_t target_vocab_limit = 0;
  // constraint files; empty path = not provided
  std::string en_general_attract, en_general_repel;
  std::string en_domain_attract, en_domain_repel;
  std::string zh_general_attract, zh_general_repel;
  std::string zh_domain_attract, zh_domain_repel;
  std::string cl_domain_attract;
  // evaluation inputs
  std::vector<std::pair<std::string, std::string>> benchmarks;  // (name, path)
  std::string dataset;
  std::string cluster_seeds;

  std::string output_dir;
  std::uint64_t seed = 1;

  // ablations
  bool phrase_level = true;
  bool refinement = true;
  bool refine_domain_only = false;  // leave general groups unfiltered
  bool postspec = true;
  bool use_external_target = true;
  ConstraintSelection selection = ConstraintSelection::Both;

  // module configs (seeds are derived per stage from the global seed)
  ProjectionConfig projection;
  StmConfig stm;
  std::size_t stm_max_training_pairs = 10000;
  ArConfig ar;
  PostSpecConfig post;
  int classifier_epochs = 100;
  double classifier_learning_rate = 0.5;
  int classifier_runs = 1;
  std::size_t cluster_k = 20;
  TsneConfig tsne;

  LangConfig langs;
  std::map<std::string, std::string> raw;  // config echo for the manifest
};

// Flat "key = value" file with '#' comments.
PipelineConfig load_config(const std::string& path);
// Checks that every referenced input path exists.
void validate_config(const PipelineConfig& cfg);
// Applies one "key=value" override (same keys as the file).
void apply_override(PipelineConfig& cfg, const std::string& key,
                    const std::string& value);

struct StageResult {
  std::string name;
  std::string status;  // SUCCESS or SKIPPED
  double seconds = 0.0;
  std::vector<std::string> artifacts;  // paths relative to output_dir
  std::map<std::string, std::int64_t> counts;
  std::map<std::string, double> metrics;
};

// Individual stages; each expects its upstream artifacts on disk.
StageResult stage_project(const PipelineConfig& cfg);
StageResult stage_refine(const PipelineConfig& cfg);
StageResult stage_specialise(const PipelineConfig& cfg);
StageResult stage_postspec(const PipelineConfig& cfg);
StageResult stage_eval_similarity(const PipelineConfig& cfg);
StageResult stage_eval_classifier(const PipelineConfig& cfg);
StageResult stage_clusters(const PipelineConfig& cfg);

struct RunManifest {
  std::string tool_version;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config_echo;
  std::vector<StageResult> stages;

  void write(const std::string& path) const;  // atomic: tmp + rename
  std::string to_json() const;
};

// Runs every stage in order and writes <output_dir>/manifest.json.
RunManifest run_pipeline(const PipelineConfig& cfg);

}  // namespace sexwes
