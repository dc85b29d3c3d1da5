#include "sexwes/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace sexwes {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::runtime_error("config: boolean expected for " + key);
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw std::runtime_error("config: number expected for " + key);
  }
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
  try {
    return std::stoll(v);
  } catch (const std::exception&) {
    throw std::runtime_error("config: integer expected for " + key);
  }
}

fs::path out_path(const PipelineConfig& cfg, const std::string& rel) {
  return fs::path(cfg.output_dir) / rel;
}

void ensure_parent(const fs::path& p) { fs::create_directories(p.parent_path()); }

struct StageTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

EmbeddingSpace load_normalized(const std::string& path, std::size_t limit) {
  return unit_normalize(load_embeddings(path, limit));
}

struct GroupFiles {
  Group group;
  std::string tag;  // "general" or "domain"
  std::string attract_path, repel_path;
};

std::vector<GroupFiles> selected_source_groups(const PipelineConfig& cfg) {
  std::vector<GroupFiles> groups;
  const bool want_general = cfg.selection != ConstraintSelection::Domain;
  const bool want_domain = cfg.selection != ConstraintSelection::General;
  if (want_general && !cfg.en_general_attract.empty())
    groups.push_back({Group::General, "general", cfg.en_general_attract,
                      cfg.en_general_repel});
  if (want_domain && !cfg.en_domain_attract.empty())
    groups.push_back(
        {Group::Domain, "domain", cfg.en_domain_attract, cfg.en_domain_repel});
  if (groups.empty())
    throw std::runtime_error("no source constraint files for the selection");
  return groups;
}

std::string projected_rel(const GroupFiles& g, Relation r) {
  return "projection/projected_" + g.tag + "_" + std::string(to_string(r)) +
         ".tsv";
}

std::string refined_rel(const GroupFiles& g, Relation r) {
  return "refine/refined_" + g.tag + "_" + std::string(to_string(r)) + ".tsv";
}

// C_cl attract candidates translated into the target language.
constexpr const char* kClTranslatedRel = "projection/crosslingual_translated.tsv";
constexpr const char* kClRefinedRel = "refine/refined_crosslingual_translated.tsv";
constexpr const char* kProjectionRel = "projection/w_en_zh.txt";
constexpr const char* kMergedAttractRel = "constraints/merged_attract.tsv";
constexpr const char* kMergedRepelRel = "constraints/merged_repel.tsv";
constexpr const char* kArSpaceRel = "spaces/ar_specialised.vec";
constexpr const char* kFinalSpaceRel = "spaces/final.vec";

ProjectionConfig stage_projection_config(const PipelineConfig& cfg) {
  ProjectionConfig pc = cfg.projection;
  pc.seed = derive_seed(cfg.seed, "projection");
  return pc;
}

// Translates the source side of cross-lingual attract pairs into
// target-language attract candidates.
ConstraintSet translate_crosslingual(const ConstraintSet& cl,
                                     const ProjectionMatrix& w,
                                     const EmbeddingSpace& src,
                                     const EmbeddingSpace& tgt,
                                     const ProjectionConfig& pc,
                                     const LangConfig& langs,
                                     std::map<std::string, std::int64_t>* counts,
                                     const std::string& prefix) {
  CslsContext ctx;
  const CslsContext* ctx_ptr = nullptr;
  if (pc.csls_retrieval) {
    ctx = CslsContext::build(src, tgt, w, pc.k_neighbors);
    ctx_ptr = &ctx;
  }
  ConstraintSet out;
  out.relation = Relation::Attract;
  out.group = Group::Domain;
  std::int64_t unresolved = 0, self = 0;
  for (const auto& p : cl.pairs) {
    const TaggedTerm& en = p.a.lang == langs.source ? p.a : p.b;
    const TaggedTerm& zh = p.a.lang == langs.source ? p.b : p.a;
    const auto tr = translate_term(en, w, src, tgt, pc, ctx_ptr);
    if (!tr) {
      ++unresolved;
      continue;
    }
    if (tr->word == zh.surface) {
      ++self;
      continue;
    }
    out.insert(TermPair({langs.target, tr->word}, {langs.target, zh.surface}));
  }
  if (counts) {
    (*counts)[prefix + "_in"] = static_cast<std::int64_t>(cl.size());
    (*counts)[prefix + "_out"] = static_cast<std::int64_t>(out.size());
    (*counts)[prefix + "_unresolvable"] = unresolved;
    (*counts)[prefix + "_self"] = self;
  }
  return out;
}

}  // namespace

// ---- configuration ---------------------------------------------------------

void apply_override(PipelineConfig& cfg, const std::string& key,
                    const std::string& value) {
  cfg.raw[key] = value;
  if (key == "paths.source_embeddings") cfg.source_embeddings = value;
  else if (key == "paths.target_embeddings") cfg.target_embeddings = value;
  else if (key == "paths.seed_dictionary") cfg.seed_dictionary = value;
  else if (key == "paths.constraints.en_general_attract") cfg.en_general_attract = value;
  else if (key == "paths.constraints.en_general_repel") cfg.en_general_repel = value;
  else if (key == "paths.constraints.en_domain_attract") cfg.en_domain_attract = value;
  else if (key == "paths.constraints.en_domain_repel") cfg.en_domain_repel = value;
  else if (key == "paths.constraints.zh_general_attract") cfg.zh_general_attract = value;
  else if (key == "paths.constraints.zh_general_repel") cfg.zh_general_repel = value;
  else if (key == "paths.constraints.zh_domain_attract") cfg.zh_domain_attract = value;
  else if (key == "paths.constraints.zh_domain_repel") cfg.zh_domain_repel = value;
  else if (key == "paths.constraints.cl_domain_attract") cfg.cl_domain_attract = value;
  else if (key == "paths.dataset") cfg.dataset = value;
  else if (key == "paths.cluster_seeds") cfg.cluster_seeds = value;
  else if (key == "paths.benchmarks") {
    cfg.benchmarks.clear();
    std::size_t start = 0;
    while (start < value.size()) {
      std::size_t comma = value.find(',', start);
      if (comma == std::string::npos) comma = value.size();
      const std::string item = trim(value.substr(start, comma - start));
      if (!item.empty()) {
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos)
          throw std::runtime_error("config: benchmarks need name:path entries");
        cfg.benchmarks.emplace_back(trim(item.substr(0, colon)),
                                    trim(item.substr(colon + 1)));
      }
      start = comma + 1;
    }
  } else if (key == "output_dir") cfg.output_dir = value;
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(value, key));
  else if (key == "vocab_limit.source") cfg.source_vocab_limit = static_cast<std::size_t>(parse_int(value, key));
  else if (key == "vocab_limit.target") cfg.target_vocab_limit = static_cast<std::size_t>(parse_int(value, key));
  else if (key == "lang.source") cfg.langs.source = value;
  else if (key == "lang.target") cfg.langs.target = value;
  else if (key == "ablation.phrase_level") cfg.phrase_level = parse_bool(value, key);
  else if (key == "ablation.refinement") cfg.refinement = parse_bool(value, key);
  else if (key == "ablation.refine_domain_only") cfg.refine_domain_only = parse_bool(value, key);
  else if (key == "ablation.postspec") cfg.postspec = parse_bool(value, key);
  else if (key == "ablation.use_external_target") cfg.use_external_target = parse_bool(value, key);
  else if (key == "ablation.constraint_selection") {
    if (value == "general") cfg.selection = ConstraintSelection::General;
    else if (value == "domain") cfg.selection = ConstraintSelection::Domain;
    else if (value == "both") cfg.selection = ConstraintSelection::Both;
    else throw std::runtime_error("config: constraint_selection must be general|domain|both");
  }
  else if (key == "projection.k_neighbors") cfg.projection.k_neighbors = static_cast<int>(parse_int(value, key));
  else if (key == "projection.iterations") cfg.projection.iterations = static_cast<int>(parse_int(value, key));
  else if (key == "projection.learning_rate") cfg.projection.learning_rate = parse_double(value, key);
  else if (key == "projection.batch_size") cfg.projection.batch_size = static_cast<int>(parse_int(value, key));
  else if (key == "projection.csls_retrieval") cfg.projection.csls_retrieval = parse_bool(value, key);
  else if (key == "stm.num_tensors") cfg.stm.num_tensors = static_cast<int>(parse_int(value, key));
  else if (key == "stm.hidden_size") cfg.stm.hidden_size = static_cast<int>(parse_int(value, key));
  else if (key == "stm.dropout") cfg.stm.dropout = parse_double(value, key);
  else if (key == "stm.batch_size") cfg.stm.batch_size = static_cast<int>(parse_int(value, key));
  else if (key == "stm.max_iterations") cfg.stm.max_iterations = static_cast<int>(parse_int(value, key));
  else if (key == "stm.learning_rate") cfg.stm.learning_rate = parse_double(value, key);
  else if (key == "stm.threshold") cfg.stm.threshold = parse_double(value, key);
  else if (key == "stm.symmetrize") cfg.stm.symmetrize = parse_bool(value, key);
  else if (key == "stm.max_training_pairs") cfg.stm_max_training_pairs = static_cast<std::size_t>(parse_int(value, key));
  else if (key == "ar.attract_margin") cfg.ar.attract_margin = parse_double(value, key);
  else if (key == "ar.repel_margin") cfg.ar.repel_margin = parse_double(value, key);
  else if (key == "ar.reg_lambda") cfg.ar.reg_lambda = parse_double(value, key);
  else if (key == "ar.learning_rate") cfg.ar.learning_rate = parse_double(value, key);
  else if (key == "ar.batch_size") cfg.ar.batch_size = static_cast<int>(parse_int(value, key));
  else if (key == "ar.epochs") cfg.ar.epochs = static_cast<int>(parse_int(value, key));
  else if (key == "postspec.hidden_layers") cfg.post.hidden_layers = static_cast<int>(parse_int(value, key));
  else if (key == "postspec.hidden_units") cfg.post.hidden_units = static_cast<int>(parse_int(value, key));
  else if (key == "postspec.generator_dropout") cfg.post.generator_dropout = parse_double(value, key);
  else if (key == "postspec.discriminator_dropout") cfg.post.discriminator_dropout = parse_double(value, key);
  else if (key == "postspec.margin") cfg.post.margin = parse_double(value, key);
  else if (key == "postspec.confounders") cfg.post.confounders = static_cast<int>(parse_int(value, key));
  else if (key == "postspec.learning_rate") cfg.post.learning_rate = parse_double(value, key);
  else if (key == "postspec.epochs") cfg.post.epochs = static_cast<int>(parse_int(value, key));
  else if (key == "postspec.batch_size") cfg.post.batch_size = static_cast<int>(parse_int(value, key));
  else if (key == "postspec.w_mm") cfg.post.w_mm = parse_double(value, key);
  else if (key == "postspec.w_cycle") cfg.post.w_cycle = parse_double(value, key);
  else if (key == "postspec.w_adv") cfg.post.w_adv = parse_double(value, key);
  else if (key == "postspec.literal_margin_inputs") cfg.post.literal_margin_inputs = parse_bool(value, key);
  else if (key == "postspec.least_squares_adv") cfg.post.least_squares_adv = parse_bool(value, key);
  else if (key == "postspec.splice_seen") cfg.post.splice_seen = parse_bool(value, key);
  else if (key == "classifier.epochs") cfg.classifier_epochs = static_cast<int>(parse_int(value, key));
  else if (key == "classifier.learning_rate") cfg.classifier_learning_rate = parse_double(value, key);
  else if (key == "classifier.runs") cfg.classifier_runs = static_cast<int>(parse_int(value, key));
  else if (key == "cluster.k") cfg.cluster_k = static_cast<std::size_t>(parse_int(value, key));
  else if (key == "tsne.perplexity") cfg.tsne.perplexity = parse_double(value, key);
  else if (key == "tsne.iterations") cfg.tsne.iterations = static_cast<int>(parse_int(value, key));
  else throw std::runtime_error("config: unknown key \"" + key + "\"");
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  PipelineConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected \"key = value\"");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      apply_override(cfg, key, value);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  if (cfg.output_dir.empty())
    throw std::runtime_error("config: output_dir is required");
  return cfg;
}

// ---- stages ----------------------------------------------------------------

StageResult stage_project(const PipelineConfig& cfg) {
  StageTimer timer;
  StageResult res;
  res.name = "projection";
  res.status = "SUCCESS";

  const auto src = load_normalized(cfg.source_embeddings, cfg.source_vocab_limit);
  const auto tgt = load_normalized(cfg.target_embeddings, cfg.target_vocab_limit);
  const auto dict = load_seed_dictionary(cfg.seed_dictionary);
  const ProjectionConfig pc = stage_projection_config(cfg);

  RcslsTrainStats train_stats;
  const auto w = train_rcsls(src, tgt, dict, pc, &train_stats);
  ensure_parent(out_path(cfg, kProjectionRel));
  save_projection(w, out_path(cfg, kProjectionRel).string());
  res.artifacts.push_back(kProjectionRel);
  res.counts["seed_pairs_resolved"] =
      static_cast<std::int64_t>(train_stats.pairs_resolved);
  res.counts["seed_pairs_skipped"] =
      static_cast<std::int64_t>(train_stats.pairs_skipped);
  res.metrics["rcsls_objective"] = train_stats.best_objective;

  for (const auto& g : selected_source_groups(cfg)) {
    for (Relation rel : {Relation::Attract, Relation::Repel}) {
      const std::string& path =
          rel == Relation::Attract ? g.attract_path : g.repel_path;
      if (path.empty()) continue;
      const auto c_src = load_constraints(path, rel, g.group, cfg.langs);
      ProjectStats pstats;
      const auto projected = project_constraints(c_src, w, src, tgt, pc,
                                                 cfg.phrase_level, cfg.langs,
                                                 &pstats);
      const std::string rel_path = projected_rel(g, rel);
      ensure_parent(out_path(cfg, rel_path));
      save_constraints(projected, out_path(cfg, rel_path).string());
      res.artifacts.push_back(rel_path);
      const std::string prefix = g.tag + "_" + to_string(rel);
      res.counts[prefix + "_in"] = static_cast<std::int64_t>(c_src.size());
      res.counts[prefix + "_out"] = static_cast<std::int64_t>(projected.size());
      res.counts[prefix + "_dropped_unresolvable"] =
          static_cast<std::int64_t>(pstats.dropped_unresolvable);
      res.counts[prefix + "_dropped_self"] =
          static_cast<std::int64_t>(pstats.dropped_self);
      res.counts[prefix + "_dropped_phrase"] =
          static_cast<std::int64_t>(pstats.dropped_phrase);
    }
  }

  if (!cfg.cl_domain_attract.empty()) {
    const auto cl = load_constraints(cfg.cl_domain_attract, Relation::Attract,
                                     Group::CrossLingual, cfg.langs);
    const auto translated = translate_crosslingual(
        cl, w, src, tgt, pc, cfg.langs, &res.counts, "crosslingual");
    ensure_parent(out_path(cfg, kClTranslatedRel));
    save_constraints(translated, out_path(cfg, kClTranslatedRel).string());
    res.artifacts.push_back(kClTranslatedRel);
  }

  res.seconds = timer.seconds();
  return res;
}

namespace {

// Trains one monolingual STM instance on source-language constraints seen
// through the shared space and filters one projected candidate file.
void refine_group(const PipelineConfig& cfg, const PairEmbedder& embedder,
                  const GroupFiles& g, Relation rel, StmKind kind,
                  StageResult& res) {
  const std::string& pos_path =
      rel == Relation::Attract ? g.attract_path : g.repel_path;
  const std::string& confusion_path =
      rel == Relation::Attract ? g.repel_path : g.attract_path;
  if (pos_path.empty()) return;

  if (cfg.refine_domain_only && g.group == Group::General) {
    // general candidates pass through unfiltered in domain-only mode
    const auto candidates = load_constraints(
        out_path(cfg, projected_rel(g, rel)).string(), rel, g.group, cfg.langs);
    const std::string rel_path = refined_rel(g, rel);
    ensure_parent(out_path(cfg, rel_path));
    save_constraints(candidates, out_path(cfg, rel_path).string());
    res.artifacts.push_back(rel_path);
    const std::string prefix = g.tag + "_" + to_string(rel);
    res.counts[prefix + "_in"] = static_cast<std::int64_t>(candidates.size());
    res.counts[prefix + "_kept"] = static_cast<std::int64_t>(candidates.size());
    res.counts[prefix + "_dropped"] = 0;
    return;
  }

  auto positives = load_constraints(pos_path, rel, g.group, cfg.langs);
  ConstraintSet confusion;
  const ConstraintSet* confusion_ptr = nullptr;
  if (!confusion_path.empty()) {
    confusion = load_constraints(
        confusion_path,
        rel == Relation::Attract ? Relation::Repel : Relation::Attract, g.group,
        cfg.langs);
    confusion_ptr = &confusion;
  }

  StmConfig sc = cfg.stm;
  sc.seed = derive_seed(cfg.seed, std::string("stm.") + to_string(kind));
  if (cfg.stm_max_training_pairs > 0 &&
      positives.size() > cfg.stm_max_training_pairs) {
    Rng rng(splitmix64(sc.seed ^ 0x5ab5a317ULL));
    rng.shuffle(positives.pairs);
    positives.pairs.resize(cfg.stm_max_training_pairs);
    std::sort(positives.pairs.begin(), positives.pairs.end());
  }

  StmTrainStats tstats;
  const auto model =
      train_stm(positives, nullptr, confusion_ptr, embedder, sc, kind, &tstats);
  const std::string model_rel = "refine/stm_" + std::string(to_string(kind)) + ".json";
  ensure_parent(out_path(cfg, model_rel));
  model.save(out_path(cfg, model_rel).string());
  res.artifacts.push_back(model_rel);
  res.metrics[std::string("stm_") + to_string(kind) + "_heldout_accuracy"] =
      tstats.heldout_accuracy;

  const auto candidates = load_constraints(
      out_path(cfg, projected_rel(g, rel)).string(), rel, g.group, cfg.langs);
  const auto filtered =
      filter_constraints(model, candidates, embedder, cfg.stm.threshold);
  const std::string rel_path = refined_rel(g, rel);
  ensure_parent(out_path(cfg, rel_path));
  save_constraints(filtered.kept, out_path(cfg, rel_path).string());
  res.artifacts.push_back(rel_path);

  const std::string prefix = g.tag + "_" + to_string(rel);
  res.counts[prefix + "_in"] = static_cast<std::int64_t>(candidates.size());
  res.counts[prefix + "_kept"] = static_cast<std::int64_t>(filtered.kept.size());
  res.counts[prefix + "_dropped"] =
      static_cast<std::int64_t>(filtered.dropped_below_threshold);
  res.counts[prefix + "_unresolvable"] =
      static_cast<std::int64_t>(filtered.dropped_unresolvable);
}

}  // namespace

StageResult stage_refine(const PipelineConfig& cfg) {
  StageTimer timer;
  StageResult res;
  res.name = "refinement";

  if (!cfg.refinement) {
    // counts pass through unchanged; the specialise stage reads the
    // projected files directly
    res.status = "SKIPPED";
    for (const auto& g : selected_source_groups(cfg)) {
      for (Relation rel : {Relation::Attract, Relation::Repel}) {
        if ((rel == Relation::Attract ? g.attract_path : g.repel_path).empty())
          continue;
        const auto projected = load_constraints(
            out_path(cfg, projected_rel(g, rel)).string(), rel, g.group,
            cfg.langs);
        const std::string prefix = g.tag + "_" + to_string(rel);
        res.counts[prefix + "_in"] = static_cast<std::int64_t>(projected.size());
        res.counts[prefix + "_kept"] = static_cast<std::int64_t>(projected.size());
        res.counts[prefix + "_dropped"] = 0;
      }
    }
    res.seconds = timer.seconds();
    return res;
  }

  res.status = "SUCCESS";
  const auto src = load_normalized(cfg.source_embeddings, cfg.source_vocab_limit);
  const auto tgt = load_normalized(cfg.target_embeddings, cfg.target_vocab_limit);
  const auto w = load_projection(out_path(cfg, kProjectionRel).string());

  PairEmbedder embedder;
  embedder.tgt = &tgt;
  embedder.src = &src;
  embedder.projection = &w;
  embedder.langs = cfg.langs;

  for (const auto& g : selected_source_groups(cfg)) {
    const StmKind attract_kind =
        g.group == Group::General ? StmKind::Ga : StmKind::Da;
    const StmKind repel_kind =
        g.group == Group::General ? StmKind::Gr : StmKind::Dr;
    refine_group(cfg, embedder, g, Relation::Attract, attract_kind, res);
    refine_group(cfg, embedder, g, Relation::Repel, repel_kind, res);
  }

  if (!cfg.cl_domain_attract.empty()) {
    const auto cl = load_constraints(cfg.cl_domain_attract, Relation::Attract,
                                     Group::CrossLingual, cfg.langs);
    StmConfig sc = cfg.stm;
    sc.seed = derive_seed(cfg.seed, "stm.Dcl");
    StmTrainStats tstats;
    const auto model =
        train_stm(cl, nullptr, nullptr, embedder, sc, StmKind::Dcl, &tstats);
    const std::string model_rel = "refine/stm_Dcl.json";
    ensure_parent(out_path(cfg, model_rel));
    model.save(out_path(cfg, model_rel).string());
    res.artifacts.push_back(model_rel);
    res.metrics["stm_Dcl_heldout_accuracy"] = tstats.heldout_accuracy;

    const auto filtered = filter_constraints(model, cl, embedder, cfg.stm.threshold);
    res.counts["crosslingual_in"] = static_cast<std::int64_t>(cl.size());
    res.counts["crosslingual_kept"] =
        static_cast<std::int64_t>(filtered.kept.size());
    res.counts["crosslingual_dropped"] =
        static_cast<std::int64_t>(filtered.dropped_below_threshold);

    const ProjectionConfig pc = stage_projection_config(cfg);
    const auto translated =
        translate_crosslingual(filtered.kept, w, src, tgt, pc, cfg.langs,
                               &res.counts, "crosslingual_translated");
    ensure_parent(out_path(cfg, kClRefinedRel));
    save_constraints(translated, out_path(cfg, kClRefinedRel).string());
    res.artifacts.push_back(kClRefinedRel);
  }

  res.seconds = timer.seconds();
  return res;
}

StageResult stage_specialise(const PipelineConfig& cfg) {
  StageTimer timer;
  StageResult res;
  res.name = "specialise";
  res.status = "SUCCESS";

  const auto tgt = load_normalized(cfg.target_embeddings, cfg.target_vocab_limit);

  std::vector<ConstraintSet> attract_sets, repel_sets;
  for (const auto& g : selected_source_groups(cfg)) {
    for (Relation rel : {Relation::Attract, Relation::Repel}) {
      if ((rel == Relation::Attract ? g.attract_path : g.repel_path).empty())
        continue;
      const std::string rel_path =
          cfg.refinement ? refined_rel(g, rel) : projected_rel(g, rel);
      const auto set = load_constraints(out_path(cfg, rel_path).string(), rel,
                                        g.group, cfg.langs);
      (rel == Relation::Attract ? attract_sets : repel_sets).push_back(set);
    }
  }
  if (!cfg.cl_domain_attract.empty()) {
    const std::string rel_path = cfg.refinement ? kClRefinedRel : kClTranslatedRel;
    attract_sets.push_back(load_constraints(out_path(cfg, rel_path).string(),
                                            Relation::Attract, Group::Domain,
                                            cfg.langs));
  }
  if (cfg.use_external_target) {
    const bool want_general = cfg.selection != ConstraintSelection::Domain;
    const bool want_domain = cfg.selection != ConstraintSelection::General;
    const auto add_external = [&](const std::string& path, Relation rel,
                                  Group group) {
      if (path.empty()) return;
      (rel == Relation::Attract ? attract_sets : repel_sets)
          .push_back(load_constraints(path, rel, group, cfg.langs));
    };
    if (want_general) {
      add_external(cfg.zh_general_attract, Relation::Attract, Group::General);
      add_external(cfg.zh_general_repel, Relation::Repel, Group::General);
    }
    if (want_domain) {
      add_external(cfg.zh_domain_attract, Relation::Attract, Group::Domain);
      add_external(cfg.zh_domain_repel, Relation::Repel, Group::Domain);
    }
  }
  if (attract_sets.empty())
    throw std::runtime_error("no attract constraints reach the specialiser");

  const auto merged_attract = merge(attract_sets);
  ConstraintSet merged_repel;
  merged_repel.relation = Relation::Repel;
  merged_repel.group = merged_attract.group;
  if (!repel_sets.empty()) merged_repel = merge(repel_sets);

  ensure_parent(out_path(cfg, kMergedAttractRel));
  save_constraints(merged_attract, out_path(cfg, kMergedAttractRel).string());
  save_constraints(merged_repel, out_path(cfg, kMergedRepelRel).string());
  res.artifacts.push_back(kMergedAttractRel);
  res.artifacts.push_back(kMergedRepelRel);
  res.counts["merged_attract"] = static_cast<std::int64_t>(merged_attract.size());
  res.counts["merged_repel"] = static_cast<std::int64_t>(merged_repel.size());

  ArConfig ac = cfg.ar;
  ac.seed = derive_seed(cfg.seed, "attract-repel");
  ArTrainStats tstats;
  ensure_parent(out_path(cfg, "logs/ar_training.csv"));
  const auto specialised =
      specialise(tgt, merged_attract, merged_repel, ac, &tstats,
                 out_path(cfg, "logs/ar_training.csv").string());
  ensure_parent(out_path(cfg, kArSpaceRel));
  save_embeddings(specialised, out_path(cfg, kArSpaceRel).string());
  res.artifacts.push_back(kArSpaceRel);
  res.artifacts.push_back("logs/ar_training.csv");
  res.counts["attract_pairs_resolved"] =
      static_cast<std::int64_t>(tstats.attract_pairs);
  res.counts["repel_pairs_resolved"] =
      static_cast<std::int64_t>(tstats.repel_pairs);
  res.counts["pairs_skipped"] = static_cast<std::int64_t>(tstats.pairs_skipped);

  res.seconds = timer.seconds();
  return res;
}

StageResult stage_postspec(const PipelineConfig& cfg) {
  StageTimer timer;
  StageResult res;
  res.name = "postspec";

  if (!cfg.postspec) {
    res.status = "SKIPPED";
    // without the mapping step the final space is the AR space, bit for bit
    ensure_parent(out_path(cfg, kFinalSpaceRel));
    fs::copy_file(out_path(cfg, kArSpaceRel), out_path(cfg, kFinalSpaceRel),
                  fs::copy_options::overwrite_existing);
    res.artifacts.push_back(kFinalSpaceRel);
    res.seconds = timer.seconds();
    return res;
  }

  res.status = "SUCCESS";
  const auto plain = load_normalized(cfg.target_embeddings, cfg.target_vocab_limit);
  const auto ar_space = load_embeddings(out_path(cfg, kArSpaceRel).string());

  const auto merged_attract =
      load_constraints(out_path(cfg, kMergedAttractRel).string(),
                       Relation::Attract, Group::Both, cfg.langs);
  const auto merged_repel =
      load_constraints(out_path(cfg, kMergedRepelRel).string(), Relation::Repel,
                       Group::Both, cfg.langs);
  std::set<std::string> seen_set;
  for (const auto* set : {&merged_attract, &merged_repel}) {
    const auto seen = seen_vocabulary(*set, plain);
    seen_set.insert(seen.words.begin(), seen.words.end());
  }
  const std::vector<std::string> seen(seen_set.begin(), seen_set.end());
  res.counts["seen_words"] = static_cast<std::int64_t>(seen.size());

  PostSpecConfig pc = cfg.post;
  pc.seed = derive_seed(cfg.seed, "postspec");
  PostSpecTrainStats tstats;
  ensure_parent(out_path(cfg, "logs/postspec_training.csv"));
  const auto model =
      train_postspec(plain, ar_space, seen, pc, &tstats,
                     out_path(cfg, "logs/postspec_training.csv").string());
  ensure_parent(out_path(cfg, "postspec/mapping.json"));
  model.save(out_path(cfg, "postspec/mapping.json").string());
  res.artifacts.push_back("postspec/mapping.json");
  res.artifacts.push_back("logs/postspec_training.csv");
  res.metrics["heldout_mm_initial"] = tstats.initial_heldout_mm;
  res.metrics["heldout_mm_best"] = tstats.best_heldout_mm;

  const EmbeddingSpace final_space =
      pc.splice_seen ? apply_mapping(model, plain, &seen, &ar_space)
                     : apply_mapping(model, plain);
  save_embeddings(final_space, out_path(cfg, kFinalSpaceRel).string());
  res.artifacts.push_back(kFinalSpaceRel);

  res.seconds = timer.seconds();
  return res;
}

StageResult stage_eval_similarity(const PipelineConfig& cfg) {
  StageTimer timer;
  StageResult res;
  res.name = "eval-sim";
  if (cfg.benchmarks.empty()) {
    res.status = "SKIPPED";
    res.seconds = timer.seconds();
    return res;
  }
  res.status = "SUCCESS";

  const auto baseline =
      load_normalized(cfg.target_embeddings, cfg.target_vocab_limit);
  const auto final_space = load_embeddings(out_path(cfg, kFinalSpaceRel).string());

  ensure_parent(out_path(cfg, "eval/similarity.csv"));
  std::ofstream csv(out_path(cfg, "eval/similarity.csv"), std::ios::binary);
  csv << "benchmark,space,rho,covered_pairs,total_pairs\n";
  for (const auto& [name, path] : cfg.benchmarks) {
    const auto bench = load_benchmark(path, name);
    const auto base_rep = eval_word_similarity(baseline, bench);
    const auto final_rep = eval_word_similarity(final_space, bench);
    csv << name << ",baseline," << format_double(base_rep.rho) << ','
        << base_rep.covered_pairs << ',' << base_rep.total_pairs << '\n';
    csv << name << ",specialised," << format_double(final_rep.rho) << ','
        << final_rep.covered_pairs << ',' << final_rep.total_pairs << '\n';
    res.metrics["rho_baseline_" + name] = base_rep.rho;
    res.metrics["rho_specialised_" + name] = final_rep.rho;
    res.counts["covered_" + name] =
        static_cast<std::int64_t>(final_rep.covered_pairs);
    res.counts["total_" + name] = static_cast<std::int64_t>(final_rep.total_pairs);
  }
  res.artifacts.push_back("eval/similarity.csv");
  res.seconds = timer.seconds();
  return res;
}

StageResult stage_eval_classifier(const PipelineConfig& cfg) {
  StageTimer timer;
  StageResult res;
  res.name = "eval-clf";
  if (cfg.dataset.empty()) {
    res.status = "SKIPPED";
    res.seconds = timer.seconds();
    return res;
  }
  res.status = "SUCCESS";

  const auto baseline =
      load_normalized(cfg.target_embeddings, cfg.target_vocab_limit);
  const auto final_space = load_embeddings(out_path(cfg, kFinalSpaceRel).string());

  auto data = load_dataset(cfg.dataset);
  // 4:1 train/test split, then a fifth of the training set for validation
  split_dataset(data, 0.64, 0.16, 0.20, derive_seed(cfg.seed, "split"));
  const auto sizes = data.split_sizes();
  res.counts["train"] = static_cast<std::int64_t>(sizes[0]);
  res.counts["validation"] = static_cast<std::int64_t>(sizes[1]);
  res.counts["test"] = static_cast<std::int64_t>(sizes[2]);

  ensure_parent(out_path(cfg, "eval/classification.csv"));
  std::ofstream csv(out_path(cfg, "eval/classification.csv"), std::ios::binary);
  csv << "space,run,f1_sexist,f1_nonsexist,macro_f1,accuracy\n";

  const auto run_study = [&](const EmbeddingSpace& space,
                             const std::string& label) {
    const auto study = classifier_seed_study(
        space, data, cfg.classifier_epochs, cfg.classifier_learning_rate,
        derive_seed(cfg.seed, "classifier"), cfg.classifier_runs);
    for (std::size_t r = 0; r < study.per_seed.size(); ++r) {
      const auto& rep = study.per_seed[r];
      csv << label << ',' << r << ',' << format_double(rep.f1_sexist) << ','
          << format_double(rep.f1_nonsexist) << ','
          << format_double(rep.macro_f1) << ',' << format_double(rep.accuracy)
          << '\n';
    }
    csv << label << ",mean,,," << format_double(study.mean_macro_f1) << ','
        << format_double(study.mean_accuracy) << '\n';
    csv << label << ",std,,," << format_double(study.std_macro_f1) << ','
        << format_double(study.std_accuracy) << '\n';
    res.metrics["macro_f1_" + label] = study.mean_macro_f1;
    res.metrics["accuracy_" + label] = study.mean_accuracy;
  };
  run_study(baseline, "baseline");
  run_study(final_space, "specialised");

  res.artifacts.push_back("eval/classification.csv");
  res.seconds = timer.seconds();
  return res;
}

StageResult stage_clusters(const PipelineConfig& cfg) {
  StageTimer timer;
  StageResult res;
  res.name = "clusters";
  if (cfg.cluster_seeds.empty()) {
    res.status = "SKIPPED";
    res.seconds = timer.seconds();
    return res;
  }
  res.status = "SUCCESS";

  std::vector<std::string> seeds;
  {
    std::ifstream in(cfg.cluster_seeds);
    if (!in)
      throw std::runtime_error("cannot open cluster seeds: " + cfg.cluster_seeds);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.pop_back();
      if (!line.empty() && line[0] != '#') seeds.push_back(line);
    }
  }
  if (seeds.empty()) throw std::runtime_error("cluster seed list is empty");

  const auto baseline =
      load_normalized(cfg.target_embeddings, cfg.target_vocab_limit);
  const auto final_space = load_embeddings(out_path(cfg, kFinalSpaceRel).string());

  const auto rep_orig = cluster_report(baseline, seeds, cfg.cluster_k, baseline);
  const auto rep_final = cluster_report(final_space, seeds, cfg.cluster_k, baseline);

  ensure_parent(out_path(cfg, "eval/clusters.csv"));
  std::ofstream csv(out_path(cfg, "eval/clusters.csv"), std::ios::binary);
  csv << "space,seed,local_dist\n";
  for (const auto& c : rep_orig.clusters)
    csv << "baseline," << c.seed << ',' << format_double(c.local_dist) << '\n';
  for (const auto& c : rep_final.clusters)
    csv << "specialised," << c.seed << ',' << format_double(c.local_dist) << '\n';
  csv << "baseline,overall," << format_double(rep_orig.overall_local_dist) << '\n';
  csv << "specialised,overall," << format_double(rep_final.overall_local_dist)
      << '\n';
  res.artifacts.push_back("eval/clusters.csv");
  res.metrics["local_dist_baseline"] = rep_orig.overall_local_dist;
  res.metrics["local_dist_specialised"] = rep_final.overall_local_dist;
  res.counts["points"] = static_cast<std::int64_t>(rep_final.points.size());

  // 2-D export of the cluster points in both spaces
  TsneConfig tc = cfg.tsne;
  tc.seed = derive_seed(cfg.seed, "tsne");
  std::ofstream tsv(out_path(cfg, "eval/tsne.csv"), std::ios::binary);
  tsv << "space,word,cluster,x,y\n";
  const std::pair<const EmbeddingSpace*, const char*> exports[] = {
      {&baseline, "baseline"}, {&final_space, "specialised"}};
  for (const auto& pair : exports) {
    const auto& space = *pair.first;
    std::vector<Vec> pts;
    for (const auto& [word, cluster] : rep_final.points) {
      const auto r = space.find(word);
      if (!r) continue;
      pts.emplace_back(space.row(*r).begin(), space.row(*r).end());
    }
    const auto coords = project_2d(pts, tc);
    std::size_t idx = 0;
    for (const auto& [word, cluster] : rep_final.points) {
      if (!space.find(word)) continue;
      tsv << pair.second << ',' << word << ',' << cluster << ','
          << format_double(coords[idx][0]) << ','
          << format_double(coords[idx][1]) << '\n';
      ++idx;
    }
  }
  res.artifacts.push_back("eval/tsne.csv");

  res.seconds = timer.seconds();
  return res;
}

// ---- manifest and full run --------------------------------------------------

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["tool_version"] = tool_version;
  j["seed"] = seed;
  j["config"] = config_echo;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : stages) {
    nlohmann::json js;
    js["name"] = s.name;
    js["status"] = s.status;
    js["seconds"] = s.seconds;
    js["artifacts"] = s.artifacts;
    js["counts"] = s.counts;
    js["metrics"] = s.metrics;
    j["stages"].push_back(js);
  }
  return j.dump(2);
}

void RunManifest::write(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest: " + tmp);
    out << to_json() << '\n';
  }
  fs::rename(tmp, path);
}

void validate_config(const PipelineConfig& cfg) {
  std::vector<std::pair<const char*, const std::string*>> paths = {
      {"paths.source_embeddings", &cfg.source_embeddings},
      {"paths.target_embeddings", &cfg.target_embeddings},
      {"paths.seed_dictionary", &cfg.seed_dictionary},
      {"paths.constraints.en_general_attract", &cfg.en_general_attract},
      {"paths.constraints.en_general_repel", &cfg.en_general_repel},
      {"paths.constraints.en_domain_attract", &cfg.en_domain_attract},
      {"paths.constraints.en_domain_repel", &cfg.en_domain_repel},
      {"paths.constraints.zh_general_attract", &cfg.zh_general_attract},
      {"paths.constraints.zh_general_repel", &cfg.zh_general_repel},
      {"paths.constraints.zh_domain_attract", &cfg.zh_domain_attract},
      {"paths.constraints.zh_domain_repel", &cfg.zh_domain_repel},
      {"paths.constraints.cl_domain_attract", &cfg.cl_domain_attract},
      {"paths.dataset", &cfg.dataset},
      {"paths.cluster_seeds", &cfg.cluster_seeds},
  };
  for (const auto& [key, path] : paths)
    if (!path->empty() && !fs::exists(*path))
      throw std::runtime_error(std::string(key) + " does not exist: " + *path);
  for (const auto& [name, path] : cfg.benchmarks)
    if (!fs::exists(path))
      throw std::runtime_error("benchmark \"" + name + "\" does not exist: " + path);
}

RunManifest run_pipeline(const PipelineConfig& cfg) {
  validate_config(cfg);
  fs::create_directories(cfg.output_dir);
  RunManifest manifest;
  manifest.tool_version = kToolVersion;
  manifest.seed = cfg.seed;
  manifest.config_echo = cfg.raw;

  using StageFn = StageResult (*)(const PipelineConfig&);
  const std::pair<const char*, StageFn> stages[] = {
      {"projection", &stage_project},   {"refinement", &stage_refine},
      {"specialise", &stage_specialise}, {"postspec", &stage_postspec},
      {"eval-sim", &stage_eval_similarity},
      {"eval-clf", &stage_eval_classifier},
      {"clusters", &stage_clusters},
  };
  for (const auto& [name, fn] : stages) {
    try {
      manifest.stages.push_back(fn(cfg));
    } catch (const std::exception& e) {
      StageResult failed;
      failed.name = name;
      failed.status = "FAILED";
      manifest.stages.push_back(failed);
      manifest.write((fs::path(cfg.output_dir) / "manifest.json").string());
      throw std::runtime_error("stage " + std::string(name) + ": " + e.what());
    }
  }
  manifest.write((fs::path(cfg.output_dir) / "manifest.json").string());
  return manifest;
}

}  // namespace sexwes
