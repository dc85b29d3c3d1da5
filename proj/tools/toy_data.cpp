#include "toy_data.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <vector>

#include "sexwes/embedding.hpp"
#include "sexwes/linalg.hpp"
#include "sexwes/rng.hpp"

namespace sexwes::toydata {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kDim = 16;
constexpr int kClusters = 6;
constexpr int kNeighborsPerCluster = 20;
constexpr int kFamilies = 12;
constexpr int kFamilySize = 6;
constexpr int kFillers = 30;

// Two disjoint character pools; every generated word is one A-char plus one
// B-char, so word boundaries inside concatenated text never form another
// vocabulary entry and greedy segmentation recovers the tokens exactly.
const char* kPoolA[] = {
    "\xe5\xa5\xb3", "\xe6\xad\xa7", "\xe8\xbe\xb1", "\xe5\x81\x8f",
    "\xe6\x84\x9a", "\xe5\xb0\x8a", "\xe8\xa8\x80", "\xe9\xa3\x8e",
    "\xe5\xb1\xb1", "\xe6\xb0\xb4", "\xe7\x81\xab", "\xe5\x9c\x9f",
    "\xe9\x87\x91", "\xe6\x9c\xa8", "\xe6\x97\xa5", "\xe6\x9c\x88",
    "\xe4\xba\x91", "\xe9\x9b\xa8", "\xe9\x9b\xaa", "\xe7\x94\xb0",
};
const char* kPoolB[] = {
    "\xe4\xba\xba", "\xe8\xa7\x86", "\xe9\xaa\x82", "\xe8\xa7\x81",
    "\xe8\xa0\xa2", "\xe9\x87\x8d", "\xe8\xaf\xad", "\xe5\x85\x89",
    "\xe6\xb2\xb3", "\xe6\xb5\xb7", "\xe7\x9f\xb3", "\xe6\x9e\x97",
    "\xe8\x8a\xb1", "\xe8\x8d\x89", "\xe9\xb8\x9f", "\xe9\xb1\xbc",
    "\xe8\x99\xab", "\xe9\xa9\xac", "\xe7\x89\x9b", "\xe7\xbe\x8a",
};

// The six domain cluster seeds are fixed A+B words.
const std::pair<int, int> kSeedCombos[] = {
    {0, 0},  // 女人
    {1, 1},  // 歧视
    {2, 2},  // 辱骂
    {3, 3},  // 偏见
    {4, 4},  // 愚蠢
    {5, 5},  // 尊重
};

struct Word {
  std::string en, zh;
  Vec latent;  // shared unit direction before per-language noise
  int cluster = -1;   // domain cluster id or -1
  int family = -1;    // general synonym family id or -1
  bool is_seed = false;
};

Vec random_unit(Rng& rng, std::size_t d) {
  Vec v(d);
  for (auto& x : v) x = rng.normal();
  scale_inplace(v, 1.0 / norm(v));
  return v;
}

Vec perturbed(const Vec& base, double sigma, Rng& rng) {
  Vec v = base;
  for (auto& x : v) x += sigma * rng.normal();
  scale_inplace(v, 1.0 / norm(v));
  return v;
}

Mat random_rotation(std::size_t d, Rng& rng) {
  Mat m(d, d);
  for (auto& v : m.a) v = rng.normal();
  return orthogonal_polar_factor(m);
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

ToyLayout write_toy_world(const std::string& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  Rng rng(seed);

  // --- vocabulary with planted structure ---
  std::vector<Word> words;
  std::set<std::pair<int, int>> used_combos(std::begin(kSeedCombos),
                                            std::end(kSeedCombos));
  const auto next_zh = [&]() {
    for (;;) {
      const int a = static_cast<int>(rng.index(std::size(kPoolA)));
      const int b = static_cast<int>(rng.index(std::size(kPoolB)));
      if (used_combos.emplace(a, b).second)
        return std::string(kPoolA[a]) + kPoolB[b];
    }
  };

  std::vector<Vec> cluster_dirs, family_dirs;
  for (int c = 0; c < kClusters; ++c) cluster_dirs.push_back(random_unit(rng, kDim));
  for (int f = 0; f < kFamilies; ++f) family_dirs.push_back(random_unit(rng, kDim));

  for (int c = 0; c < kClusters; ++c) {
    Word seed_word;
    seed_word.en = "dom" + std::to_string(c) + "seed";
    seed_word.zh = std::string(kPoolA[kSeedCombos[c].first]) +
                   kPoolB[kSeedCombos[c].second];
    seed_word.latent = perturbed(cluster_dirs[c], 0.05, rng);
    seed_word.cluster = c;
    seed_word.is_seed = true;
    words.push_back(seed_word);
    for (int i = 0; i < kNeighborsPerCluster; ++i) {
      Word w;
      w.en = "dom" + std::to_string(c) + "n" + std::to_string(i);
      w.zh = next_zh();
      w.latent = perturbed(cluster_dirs[c], 0.25, rng);
      w.cluster = c;
      words.push_back(w);
    }
  }
  for (int f = 0; f < kFamilies; ++f) {
    for (int i = 0; i < kFamilySize; ++i) {
      Word w;
      w.en = "gen" + std::to_string(f) + "w" + std::to_string(i);
      w.zh = next_zh();
      w.latent = perturbed(family_dirs[f], 0.2, rng);
      w.family = f;
      words.push_back(w);
    }
  }
  for (int i = 0; i < kFillers; ++i) {
    Word w;
    w.en = "fill" + std::to_string(i);
    w.zh = next_zh();
    w.latent = random_unit(rng, kDim);
    words.push_back(w);
  }

  // --- the two spaces: zh is a noisy realization, en a rotated one ---
  const Mat rotation = random_rotation(kDim, rng);
  EmbeddingSpace en, zh;
  en.dim = kDim;
  zh.dim = kDim;
  for (const auto& w : words) {
    zh.add(w.zh, perturbed(w.latent, 0.08, rng));
    Vec rotated = matvec(rotation, perturbed(w.latent, 0.08, rng));
    scale_inplace(rotated, 1.0 / norm(rotated));
    en.add(w.en, rotated);
  }
  save_embeddings(en, (fs::path(dir) / "en.vec").string());
  save_embeddings(zh, (fs::path(dir) / "zh.vec").string());

  // --- seed dictionary: every other word ---
  {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < words.size(); i += 2)
      lines.push_back(words[i].en + "\t" + words[i].zh);
    write_lines(fs::path(dir) / "seed_dict.tsv", lines);
  }

  // --- constraint files ---
  const auto by_cluster = [&](int c) {
    std::vector<const Word*> out;
    for (const auto& w : words)
      if (w.cluster == c) out.push_back(&w);
    return out;
  };
  const auto by_family = [&](int f) {
    std::vector<const Word*> out;
    for (const auto& w : words)
      if (w.family == f) out.push_back(&w);
    return out;
  };

  std::vector<std::string> en_gen_att, en_gen_rep, en_dom_att, en_dom_rep;
  std::vector<std::string> zh_dom_att, zh_dom_rep, cl_dom_att;

  for (int f = 0; f < kFamilies; ++f) {
    const auto fam = by_family(f);
    for (std::size_t i = 0; i < fam.size(); ++i)
      for (std::size_t j = i + 1; j < fam.size(); ++j)
        en_gen_att.push_back("en_" + fam[i]->en + "\ten_" + fam[j]->en);
  }
  // phrases: two family members averaged still land in the family
  for (int f = 0; f < kFamilies; f += 2) {
    const auto fam = by_family(f);
    en_gen_att.push_back("en_" + fam[0]->en + " " + fam[1]->en + "\ten_" +
                         fam[2]->en);
  }
  // antonym family pairs (f, f+1)
  for (int f = 0; f + 1 < kFamilies; f += 2) {
    const auto a = by_family(f);
    const auto b = by_family(f + 1);
    for (int i = 0; i < 4; ++i)
      en_gen_rep.push_back("en_" + a[i]->en + "\ten_" + b[i]->en);
  }

  for (int c = 0; c < kClusters; ++c) {
    const auto cl = by_cluster(c);
    for (std::size_t i = 1; i < cl.size(); ++i)
      en_dom_att.push_back("en_" + cl[0]->en + "\ten_" + cl[i]->en);
    for (std::size_t i = 1; i + 1 < cl.size(); i += 3)
      en_dom_att.push_back("en_" + cl[i]->en + "\ten_" + cl[i + 1]->en);
    // a few phrase-level entries
    en_dom_att.push_back("en_" + cl[1]->en + " " + cl[2]->en + "\ten_" +
                         cl[3]->en);
  }
  for (int c = 0; c + 1 < kClusters; c += 2) {
    const auto a = by_cluster(c);
    const auto b = by_cluster(c + 1);
    for (int i = 0; i < 5; ++i)
      en_dom_rep.push_back("en_" + a[i]->en + "\ten_" + b[i]->en);
  }

  for (int c = 0; c < kClusters; ++c) {
    const auto cl = by_cluster(c);
    for (std::size_t i = 1; i < cl.size(); ++i)
      zh_dom_att.push_back("zh_" + cl[0]->zh + "\tzh_" + cl[i]->zh);
  }
  for (int c = 0; c + 1 < kClusters; c += 2) {
    const auto a = by_cluster(c);
    const auto b = by_cluster(c + 1);
    zh_dom_rep.push_back("zh_" + a[1]->zh + "\tzh_" + b[1]->zh);
    zh_dom_rep.push_back("zh_" + a[2]->zh + "\tzh_" + b[2]->zh);
  }

  // explicit cross-lingual pairs: the en word with its zh counterpart, for a
  // slice of the domain words
  for (int c = 0; c < kClusters; ++c) {
    const auto cl = by_cluster(c);
    for (std::size_t i = 0; i < cl.size(); i += 3)
      cl_dom_att.push_back("en_" + cl[i]->en + "\tzh_" + cl[i]->zh);
  }

  write_lines(fs::path(dir) / "en_general_attract.tsv", en_gen_att);
  write_lines(fs::path(dir) / "en_general_repel.tsv", en_gen_rep);
  write_lines(fs::path(dir) / "en_domain_attract.tsv", en_dom_att);
  write_lines(fs::path(dir) / "en_domain_repel.tsv", en_dom_rep);
  write_lines(fs::path(dir) / "zh_domain_attract.tsv", zh_dom_att);
  write_lines(fs::path(dir) / "zh_domain_repel.tsv", zh_dom_rep);
  write_lines(fs::path(dir) / "cl_domain_attract.tsv", cl_dom_att);

  // --- similarity benchmark: gold mirrors the original zh cosines ---
  {
    std::vector<std::string> lines;
    for (int i = 0; i < 60; ++i) {
      const auto& w1 = words[rng.index(words.size())];
      const auto& w2 = words[rng.index(words.size())];
      if (w1.zh == w2.zh) continue;
      const double cos = dot(zh.row(*zh.find(w1.zh)), zh.row(*zh.find(w2.zh)));
      const double gold = 5.0 * (cos + 1.0) + 0.2 * rng.normal();
      lines.push_back(w1.zh + "\t" + w2.zh + "\t" + format_double(gold));
    }
    for (int i = 0; i < 5; ++i)
      lines.push_back("missing" + std::to_string(i) + "\t" + words[i].zh +
                      "\t5.0");
    write_lines(fs::path(dir) / "benchmark.tsv", lines);
  }

  // --- labeled dataset: texts concatenate words without separators ---
  {
    std::vector<const Word*> domain_words, other_words;
    for (const auto& w : words) {
      if (w.cluster >= 0) domain_words.push_back(&w);
      else other_words.push_back(&w);
    }
    std::vector<std::string> lines;
    for (int i = 0; i < 260; ++i) {
      const bool sexist = i % 2 == 0;
      const auto& pool = sexist ? domain_words : other_words;
      std::string text;
      const int len = 3 + static_cast<int>(rng.index(4));
      for (int t = 0; t < len; ++t) text += pool[rng.index(pool.size())]->zh;
      lines.push_back(std::string(sexist ? "sexist" : "non-sexist") + "\t" + text);
    }
    write_lines(fs::path(dir) / "dataset.tsv", lines);
  }

  // --- cluster seeds ---
  {
    std::vector<std::string> lines;
    for (const auto& w : words)
      if (w.is_seed) lines.push_back(w.zh);
    write_lines(fs::path(dir) / "cluster_seeds.txt", lines);
  }

  // --- config ---
  ToyLayout layout;
  layout.dir = dir;
  layout.config_path = (fs::path(dir) / "config.ini").string();
  layout.run_dir = (fs::path(dir) / "run").string();
  {
    std::ofstream out(layout.config_path, std::ios::binary);
    out << "# toy end-to-end configuration\n";
    out << "paths.source_embeddings = " << (fs::path(dir) / "en.vec").string() << "\n";
    out << "paths.target_embeddings = " << (fs::path(dir) / "zh.vec").string() << "\n";
    out << "paths.seed_dictionary = " << (fs::path(dir) / "seed_dict.tsv").string() << "\n";
    out << "paths.constraints.en_general_attract = " << (fs::path(dir) / "en_general_attract.tsv").string() << "\n";
    out << "paths.constraints.en_general_repel = " << (fs::path(dir) / "en_general_repel.tsv").string() << "\n";
    out << "paths.constraints.en_domain_attract = " << (fs::path(dir) / "en_domain_attract.tsv").string() << "\n";
    out << "paths.constraints.en_domain_repel = " << (fs::path(dir) / "en_domain_repel.tsv").string() << "\n";
    out << "paths.constraints.zh_domain_attract = " << (fs::path(dir) / "zh_domain_attract.tsv").string() << "\n";
    out << "paths.constraints.zh_domain_repel = " << (fs::path(dir) / "zh_domain_repel.tsv").string() << "\n";
    out << "paths.constraints.cl_domain_attract = " << (fs::path(dir) / "cl_domain_attract.tsv").string() << "\n";
    out << "paths.benchmarks = toy:" << (fs::path(dir) / "benchmark.tsv").string() << "\n";
    out << "paths.dataset = " << (fs::path(dir) / "dataset.tsv").string() << "\n";
    out << "paths.cluster_seeds = " << (fs::path(dir) / "cluster_seeds.txt").string() << "\n";
    out << "output_dir = " << layout.run_dir << "\n";
    out << "seed = 1\n";
    out << "\n# desk-scale model sizes; published defaults stay in code\n";
    out << "stm.num_tensors = 3\n";
    out << "stm.hidden_size = 64\n";
    out << "stm.dropout = 0.3\n";
    out << "stm.max_iterations = 30\n";
    out << "stm.learning_rate = 0.003\n";
    out << "postspec.hidden_units = 64\n";
    out << "postspec.confounders = 10\n";
    out << "postspec.epochs = 60\n";
    out << "postspec.learning_rate = 0.005\n";
    out << "postspec.generator_dropout = 0.1\n";
    out << "postspec.discriminator_dropout = 0.1\n";
    out << "classifier.epochs = 80\n";
    out << "classifier.learning_rate = 0.5\n";
    out << "tsne.iterations = 300\n";
  }
  return layout;
}

}  // namespace sexwes::toydata
