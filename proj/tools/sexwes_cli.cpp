// Command-line front end: runs the full constraint-processing and
// specialisation flow or any single stage against a config file.

#include <cstdio>
#include <exception>
#include <functional>
#include <string>

#include <CLI11.hpp>

#include "sexwes/pipeline.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string output_dir;
  long long seed = -1;
  int runs = 0;
  bool skip_refinement = false;
  bool skip_postspec = false;
  bool no_phrase = false;
  bool no_external = false;
  std::string constraints;
};

void add_common(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config_path, "pipeline config file")
      ->required();
  cmd->add_option("--output-dir", opt.output_dir, "override output directory");
  cmd->add_option("--seed", opt.seed, "override the global seed");
  cmd->add_option("--runs", opt.runs,
                  "classifier repetitions aggregated as mean/stdev");
  cmd->add_flag("--skip-refinement", opt.skip_refinement,
                "skip STM constraint refinement");
  cmd->add_flag("--skip-postspec", opt.skip_postspec,
                "skip post-specialisation (final space = AR space)");
  cmd->add_flag("--no-phrase", opt.no_phrase, "drop phrase-level projection");
  cmd->add_flag("--no-external", opt.no_external,
                "exclude external target-language constraints");
  cmd->add_option("--constraints", opt.constraints,
                  "constraint selection: general|domain|both")
      ->check(CLI::IsMember({"general", "domain", "both"}));
}

sexwes::PipelineConfig make_config(const CliOptions& opt) {
  auto cfg = sexwes::load_config(opt.config_path);
  if (!opt.output_dir.empty())
    sexwes::apply_override(cfg, "output_dir", opt.output_dir);
  if (opt.seed >= 0)
    sexwes::apply_override(cfg, "seed", std::to_string(opt.seed));
  if (opt.runs > 0)
    sexwes::apply_override(cfg, "classifier.runs", std::to_string(opt.runs));
  if (opt.skip_refinement)
    sexwes::apply_override(cfg, "ablation.refinement", "false");
  if (opt.skip_postspec)
    sexwes::apply_override(cfg, "ablation.postspec", "false");
  if (opt.no_phrase)
    sexwes::apply_override(cfg, "ablation.phrase_level", "false");
  if (opt.no_external)
    sexwes::apply_override(cfg, "ablation.use_external_target", "false");
  if (!opt.constraints.empty())
    sexwes::apply_override(cfg, "ablation.constraint_selection", opt.constraints);
  return cfg;
}

void print_stage(const sexwes::StageResult& res) {
  std::printf("[%s] %s (%.2fs)\n", res.status.c_str(), res.name.c_str(),
              res.seconds);
  for (const auto& [key, value] : res.counts)
    std::printf("    %s = %lld\n", key.c_str(), static_cast<long long>(value));
  for (const auto& [key, value] : res.metrics)
    std::printf("    %s = %.6f\n", key.c_str(), value);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-lingual domain-aware word-vector specialisation"};
  app.require_subcommand(1);

  CliOptions opt;
  using StageFn = std::function<sexwes::StageResult(const sexwes::PipelineConfig&)>;
  struct Sub {
    const char* name;
    const char* help;
    StageFn fn;
  };
  const Sub subs[] = {
      {"project", "train the projection and project source constraints",
       sexwes::stage_project},
      {"refine", "train STM instances and filter projected constraints",
       sexwes::stage_refine},
      {"specialise", "merge constraint groups and run initial specialisation",
       sexwes::stage_specialise},
      {"postspec", "train the cyclic mapping and produce the final space",
       sexwes::stage_postspec},
      {"eval-sim", "word-similarity evaluation", sexwes::stage_eval_similarity},
      {"eval-clf", "proxy classification evaluation",
       sexwes::stage_eval_classifier},
      {"clusters", "cluster tightness report and 2-D export",
       sexwes::stage_clusters},
  };

  CLI::App* chosen = nullptr;
  StageFn chosen_fn;
  for (const auto& sub : subs) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
    add_common(cmd, opt);
    cmd->callback([&chosen, &chosen_fn, cmd, fn = sub.fn]() {
      chosen = cmd;
      chosen_fn = fn;
    });
  }
  CLI::App* run_cmd = app.add_subcommand(
      "run", "run the full pipeline and write the manifest");
  add_common(run_cmd, opt);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = make_config(opt);
    if (run_cmd->parsed()) {
      const auto manifest = sexwes::run_pipeline(cfg);
      for (const auto& stage : manifest.stages) print_stage(stage);
      std::printf("manifest: %s/manifest.json\n", cfg.output_dir.c_str());
    } else {
      print_stage(chosen_fn(cfg));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
