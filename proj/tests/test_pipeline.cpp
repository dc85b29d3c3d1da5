#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "../tools/toy_data.hpp"
#include "sexwes/pipeline.hpp"
#include "test_util.hpp"

using namespace sexwes;
namespace fs = std::filesystem;

namespace {

// One toy world shared by every test case in this binary.
const toydata::ToyLayout& toy() {
  static const toydata::ToyLayout layout = [] {
    const auto dir = testutil::temp_dir("pipeline_toy");
    return toydata::write_toy_world(dir.string());
  }();
  return layout;
}

PipelineConfig toy_config(const std::string& run_name) {
  auto cfg = load_config(toy().config_path);
  apply_override(cfg, "output_dir",
                 (fs::path(toy().dir) / run_name).string());
  return cfg;
}

nlohmann::json manifest_without_timings(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  for (auto& stage : j["stages"]) stage["seconds"] = 0.0;
  return j;
}

std::string file_bytes(const fs::path& p) { return testutil::read_file(p); }

const StageResult& stage_named(const RunManifest& m, const std::string& name) {
  for (const auto& s : m.stages)
    if (s.name == name) return s;
  REQUIRE(false);
  static StageResult dummy;
  return dummy;
}

}  // namespace

TEST_CASE("config loader rejects unknown keys and honors overrides") {
  auto dir = testutil::temp_dir("cfg");
  testutil::write_file(dir / "bad.ini", "no_such_key = 1\noutput_dir = x\n");
  CHECK_THROWS_WITH_AS(load_config((dir / "bad.ini").string()),
                       doctest::Contains("unknown key"), std::runtime_error);

  testutil::write_file(dir / "ok.ini",
                       "# comment\noutput_dir = /tmp/x\nseed = 9\n"
                       "ar.batch_size = 25\nablation.constraint_selection = domain\n");
  auto cfg = load_config((dir / "ok.ini").string());
  CHECK(cfg.seed == 9);
  CHECK(cfg.ar.batch_size == 25);
  CHECK(cfg.selection == ConstraintSelection::Domain);
  apply_override(cfg, "ablation.phrase_level", "false");
  CHECK(!cfg.phrase_level);

  // module defaults stay at the published values unless overridden
  CHECK(cfg.stm.num_tensors == 5);
  CHECK(cfg.post.hidden_units == 2048);
  CHECK(cfg.projection.k_neighbors == 10);
}

TEST_CASE("toy pipeline end to end: all stages succeed, clusters tighten") {
  const auto cfg = toy_config("run_main");
  const auto manifest = run_pipeline(cfg);

  REQUIRE(manifest.stages.size() == 7);
  for (const auto& s : manifest.stages) CHECK(s.status == "SUCCESS");

  // the headline behavioral claim at toy scale: domain clusters tighten
  const auto& clusters = stage_named(manifest, "clusters");
  CHECK(clusters.metrics.at("local_dist_specialised") <
        clusters.metrics.at("local_dist_baseline"));

  // artifacts exist
  for (const char* rel :
       {"projection/w_en_zh.txt", "refine/stm_Da.json",
        "constraints/merged_attract.tsv", "spaces/ar_specialised.vec",
        "spaces/final.vec", "eval/similarity.csv", "eval/classification.csv",
        "eval/clusters.csv", "eval/tsne.csv", "manifest.json"})
    CHECK(fs::exists(fs::path(cfg.output_dir) / rel));

  // refinement actually filtered candidate constraints
  const auto& refinement = stage_named(manifest, "refinement");
  CHECK(refinement.counts.at("domain_attract_kept") <=
        refinement.counts.at("domain_attract_in"));
  CHECK(refinement.counts.at("crosslingual_kept") <=
        refinement.counts.at("crosslingual_in"));

  // similarity evaluation covered the resolvable benchmark pairs only
  const auto& sim = stage_named(manifest, "eval-sim");
  CHECK(sim.counts.at("total_toy") > sim.counts.at("covered_toy"));
}

TEST_CASE("same seed reproduces the manifest except timings") {
  const auto cfg = toy_config("run_repeat");
  (void)run_pipeline(cfg);
  const auto first =
      manifest_without_timings(fs::path(cfg.output_dir) / "manifest.json");
  const auto first_space = file_bytes(fs::path(cfg.output_dir) / "spaces/final.vec");

  (void)run_pipeline(cfg);
  const auto second =
      manifest_without_timings(fs::path(cfg.output_dir) / "manifest.json");
  const auto second_space = file_bytes(fs::path(cfg.output_dir) / "spaces/final.vec");

  CHECK(first == second);
  CHECK(first_space == second_space);
}

TEST_CASE("chained subcommand stages reproduce the full-run artifacts") {
  const auto full_cfg = toy_config("run_full");
  (void)run_pipeline(full_cfg);

  const auto staged_cfg = toy_config("run_staged");
  (void)stage_project(staged_cfg);
  (void)stage_refine(staged_cfg);
  (void)stage_specialise(staged_cfg);
  (void)stage_postspec(staged_cfg);
  (void)stage_eval_similarity(staged_cfg);
  (void)stage_eval_classifier(staged_cfg);
  (void)stage_clusters(staged_cfg);

  for (const char* rel :
       {"projection/w_en_zh.txt", "projection/projected_domain_attract.tsv",
        "refine/refined_domain_attract.tsv",
        "refine/refined_crosslingual_translated.tsv",
        "constraints/merged_attract.tsv", "constraints/merged_repel.tsv",
        "spaces/ar_specialised.vec", "spaces/final.vec", "eval/similarity.csv",
        "eval/classification.csv", "eval/clusters.csv"}) {
    CHECK_MESSAGE(file_bytes(fs::path(full_cfg.output_dir) / rel) ==
                      file_bytes(fs::path(staged_cfg.output_dir) / rel),
                  rel);
  }
}

TEST_CASE("ablation: skipping post-specialisation keeps the AR space bit for bit") {
  auto cfg = toy_config("run_nops");
  apply_override(cfg, "ablation.postspec", "false");
  const auto manifest = run_pipeline(cfg);
  CHECK(stage_named(manifest, "postspec").status == "SKIPPED");
  CHECK(file_bytes(fs::path(cfg.output_dir) / "spaces/final.vec") ==
        file_bytes(fs::path(cfg.output_dir) / "spaces/ar_specialised.vec"));
}

TEST_CASE("ablation: skipping refinement passes projected counts through") {
  auto cfg = toy_config("run_noref");
  apply_override(cfg, "ablation.refinement", "false");
  const auto manifest = run_pipeline(cfg);
  const auto& refinement = stage_named(manifest, "refinement");
  CHECK(refinement.status == "SKIPPED");
  const auto& projection = stage_named(manifest, "projection");
  for (const char* group : {"general", "domain"}) {
    for (const char* rel : {"attract", "repel"}) {
      const std::string key = std::string(group) + "_" + rel;
      CHECK(refinement.counts.at(key + "_in") ==
            projection.counts.at(key + "_out"));
      CHECK(refinement.counts.at(key + "_kept") ==
            refinement.counts.at(key + "_in"));
      CHECK(refinement.counts.at(key + "_dropped") == 0);
    }
  }
  // the AR stage consumed the unfiltered projected files
  CHECK(fs::exists(fs::path(cfg.output_dir) / "spaces/final.vec"));
}

TEST_CASE("ablation: disabling phrases drops exactly the phrase pairs") {
  auto count_phrase_pairs = [](const fs::path& file) {
    std::ifstream in(file);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
      const auto tab = line.find('\t');
      const std::string a = line.substr(0, tab);
      const std::string b = line.substr(tab + 1);
      if (a.find(' ') != std::string::npos || b.find(' ') != std::string::npos)
        ++n;
    }
    return static_cast<std::int64_t>(n);
  };
  const auto phrase_general =
      count_phrase_pairs(fs::path(toy().dir) / "en_general_attract.tsv");
  const auto phrase_domain =
      count_phrase_pairs(fs::path(toy().dir) / "en_domain_attract.tsv");
  REQUIRE(phrase_general > 0);
  REQUIRE(phrase_domain > 0);

  auto cfg = toy_config("run_nophrase");
  apply_override(cfg, "ablation.phrase_level", "false");
  const auto res = stage_project(cfg);
  CHECK(res.counts.at("general_attract_dropped_phrase") == phrase_general);
  CHECK(res.counts.at("domain_attract_dropped_phrase") == phrase_domain);

  auto cfg_on = toy_config("run_phrase_on");
  const auto res_on = stage_project(cfg_on);
  CHECK(res_on.counts.at("general_attract_dropped_phrase") == 0);
  CHECK(res_on.counts.at("domain_attract_dropped_phrase") == 0);
}

TEST_CASE("constraint selection narrows the projected groups") {
  auto cfg = toy_config("run_domain_only");
  apply_override(cfg, "ablation.constraint_selection", "domain");
  const auto res = stage_project(cfg);
  CHECK(res.counts.count("domain_attract_in") == 1);
  CHECK(res.counts.count("general_attract_in") == 0);
}

TEST_CASE("classifier runs flag aggregates repeated trainings") {
  auto cfg = toy_config("run_multiruns");
  apply_override(cfg, "classifier.runs", "2");
  (void)run_pipeline(cfg);
  const auto csv = file_bytes(fs::path(cfg.output_dir) / "eval/classification.csv");
  CHECK(csv.find("specialised,1,") != std::string::npos);
  CHECK(csv.find("specialised,std,") != std::string::npos);
}

TEST_CASE("a stage error reports the stage name") {
  auto cfg = toy_config("run_broken");
  // missing paths are caught up front, before any stage runs
  cfg.seed_dictionary = "/nonexistent/dict.tsv";
  CHECK_THROWS_WITH_AS(run_pipeline(cfg), doctest::Contains("does not exist"),
                       std::runtime_error);

  // an existing but malformed input fails inside its stage
  const auto bad = fs::path(toy().dir) / "malformed_dict.tsv";
  testutil::write_file(bad, "no tab separated content here\n");
  cfg.seed_dictionary = bad.string();
  CHECK_THROWS_WITH_AS(run_pipeline(cfg), doctest::Contains("stage projection"),
                       std::runtime_error);
  const auto j = manifest_without_timings(fs::path(cfg.output_dir) / "manifest.json");
  CHECK(j["stages"][0]["status"] == "FAILED");
}

TEST_CASE("ablation flags leave upstream stages untouched") {
  // the projection artifact from the refinement-free run matches the main run
  const auto main_w =
      file_bytes(fs::path(toy().dir) / "run_main" / "projection/w_en_zh.txt");
  const auto noref_w =
      file_bytes(fs::path(toy().dir) / "run_noref" / "projection/w_en_zh.txt");
  REQUIRE(!main_w.empty());
  CHECK(main_w == noref_w);
}

TEST_CASE("domain-only refinement passes general groups through") {
  auto cfg = toy_config("run_domonly");
  apply_override(cfg, "ablation.refine_domain_only", "true");
  (void)stage_project(cfg);
  const auto res = stage_refine(cfg);
  CHECK(res.counts.at("general_attract_kept") ==
        res.counts.at("general_attract_in"));
  CHECK(res.counts.at("general_attract_dropped") == 0);
  // the domain groups were still filtered by a trained model
  CHECK(res.metrics.count("stm_Da_heldout_accuracy") == 1);
  CHECK(res.metrics.count("stm_Ga_heldout_accuracy") == 0);
}
