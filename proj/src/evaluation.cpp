#include "sexwes/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "sexwes/rng.hpp"

namespace sexwes {

namespace {

std::vector<double> average_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });

  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0)
    throw std::runtime_error("correlation undefined: zero variance");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw std::runtime_error("spearman: length mismatch");
  if (xs.size() < 2) throw std::runtime_error("spearman: need >= 2 entries");
  for (double v : xs)
    if (!std::isfinite(v)) throw std::runtime_error("spearman: non-finite input");
  for (double v : ys)
    if (!std::isfinite(v)) throw std::runtime_error("spearman: non-finite input");
  return pearson(average_ranks(xs), average_ranks(ys));
}

SimilarityBenchmark load_benchmark(const std::string& path,
                                   const std::string& name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open benchmark: " + path);
  SimilarityBenchmark bench;
  bench.name = name;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected \"word1<TAB>word2<TAB>score\"");
    SimilarityBenchmark::Entry e;
    e.word1 = line.substr(0, t1);
    e.word2 = line.substr(t1 + 1, t2 - t1 - 1);
    try {
      e.gold = std::stod(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed score");
    }
    if (!std::isfinite(e.gold))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": non-finite score");
    bench.entries.push_back(std::move(e));
  }
  return bench;
}

SimilarityReport eval_word_similarity(const EmbeddingSpace& space,
                                      const SimilarityBenchmark& bench) {
  SimilarityReport rep;
  rep.name = bench.name;
  rep.total_pairs = bench.entries.size();
  std::vector<double> gold, predicted;
  for (const auto& e : bench.entries) {
    const auto r1 = space.find(e.word1);
    const auto r2 = space.find(e.word2);
    if (!r1 || !r2) continue;
    gold.push_back(e.gold);
    predicted.push_back(cosine_similarity(space.row(*r1), space.row(*r2)));
  }
  rep.covered_pairs = gold.size();
  if (rep.covered_pairs < 2)
    throw std::runtime_error("benchmark \"" + bench.name +
                             "\" covers fewer than 2 pairs");
  rep.rho = spearman(gold, predicted);
  return rep;
}

std::vector<std::size_t> LabeledDataset::split_indices(int split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == split) out.push_back(i);
  return out;
}

std::array<std::size_t, 3> LabeledDataset::split_sizes() const {
  std::array<std::size_t, 3> sizes{0, 0, 0};
  for (const auto& r : records)
    if (r.split >= 0 && r.split < 3) ++sizes[static_cast<std::size_t>(r.split)];
  return sizes;
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  LabeledDataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected \"label<TAB>text\"");
    Record rec;
    const std::string label = line.substr(0, tab);
    if (label == "sexist") rec.label = Label::Sexist;
    else if (label == "non-sexist") rec.label = Label::NonSexist;
    else
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": unknown label \"" + label + "\"");
    rec.text = line.substr(tab + 1);
    if (rec.text.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": empty text");
    data.records.push_back(std::move(rec));
  }
  return data;
}

void split_dataset(LabeledDataset& data, double train_ratio, double val_ratio,
                   double test_ratio, std::uint64_t seed) {
  if (data.records.size() < 10)
    throw std::runtime_error("dataset too small to split (need >= 10 records)");
  const double sum = train_ratio + val_ratio + test_ratio;
  if (!(sum > 0.999 && sum < 1.001))
    throw std::runtime_error("split ratios must sum to 1");
  const std::array<double, 3> ratios{train_ratio, val_ratio, test_ratio};

  Rng rng(seed);
  for (Label label : {Label::Sexist, Label::NonSexist}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.records.size(); ++i)
      if (data.records[i].label == label) members.push_back(i);
    if (members.empty()) continue;
    rng.shuffle(members);

    // largest-remainder allocation of this class across the three splits
    std::array<std::size_t, 3> counts{0, 0, 0};
    std::array<double, 3> remainders{0, 0, 0};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = ratios[s] * static_cast<double>(members.size());
      counts[s] = static_cast<std::size_t>(exact);
      remainders[s] = exact - static_cast<double>(counts[s]);
      assigned += counts[s];
    }
    while (assigned < members.size()) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (remainders[s] > remainders[best]) best = s;
      ++counts[best];
      remainders[best] = -1.0;
      ++assigned;
    }
    for (int s = 0; s < 3; ++s)
      if (ratios[s] > 0.0 && counts[s] == 0)
        throw std::runtime_error(
            "split would leave a class without members in split " +
            std::to_string(s));

    std::size_t cursor = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t i = 0; i < counts[s]; ++i)
        data.records[members[cursor++]].split = s;
  }
}

namespace {

bool is_utf8_continuation(unsigned char b) { return (b & 0xC0) == 0x80; }

// byte offsets of the code points in s
std::vector<std::size_t> codepoint_offsets(const std::string& s) {
  std::vector<std::size_t> offs;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!is_utf8_continuation(static_cast<unsigned char>(s[i]))) offs.push_back(i);
  offs.push_back(s.size());
  return offs;
}

}  // namespace

std::vector<std::string> segment_greedy(const EmbeddingSpace& space,
                                        const std::string& text) {
  // longest vocabulary entry measured in code points
  std::size_t max_len = 1;
  for (const auto& w : space.words) {
    std::size_t cp = 0;
    for (unsigned char c : w)
      if (!is_utf8_continuation(c)) ++cp;
    max_len = std::max(max_len, cp);
  }

  const auto offs = codepoint_offsets(text);
  const std::size_t n_cp = offs.size() - 1;
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < n_cp) {
    const std::string one = text.substr(offs[i], offs[i + 1] - offs[i]);
    if (one == " " || one == "\t") {
      ++i;
      continue;
    }
    std::size_t take = 1;
    for (std::size_t len = std::min(max_len, n_cp - i); len > 1; --len) {
      const std::string cand = text.substr(offs[i], offs[i + len] - offs[i]);
      if (space.contains(cand)) {
        take = len;
        break;
      }
    }
    tokens.push_back(text.substr(offs[i], offs[i + take] - offs[i]));
    i += take;
  }
  return tokens;
}

Vec embed_tokens(const EmbeddingSpace& space,
                 const std::vector<std::string>& tokens, bool* all_oov) {
  Vec sum(space.dim, 0.0);
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    if (auto r = space.find(t)) {
      axpy(1.0, space.row(*r), sum);
      ++hits;
    }
  }
  if (all_oov) *all_oov = hits == 0;
  if (hits > 0) scale_inplace(sum, 1.0 / static_cast<double>(hits));
  return sum;
}

Vec embed_text(const EmbeddingSpace& space, const std::string& text,
               bool* all_oov) {
  if (text.find(' ') != std::string::npos) {
    return embed_tokens(space, tokenize_surface(text), all_oov);
  }
  return embed_tokens(space, segment_greedy(space, text), all_oov);
}

double LinearModel::predict_proba(std::span<const double> features) const {
  double z = bias;
  for (std::size_t i = 0; i < features.size(); ++i) z += weights[i] * features[i];
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

ClassificationReport classification_metrics(const std::vector<Label>& gold,
                                            const std::vector<Label>& predicted) {
  if (gold.size() != predicted.size() || gold.empty())
    throw std::runtime_error("metrics: label list mismatch");
  auto f1_for = [&](Label positive) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool g = gold[i] == positive;
      const bool p = predicted[i] == positive;
      if (g && p) ++tp;
      else if (!g && p) ++fp;
      else if (g && !p) ++fn;
    }
    const double denom = 2.0 * tp + fp + fn;
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
  };
  ClassificationReport rep;
  rep.f1_sexist = f1_for(Label::Sexist);
  rep.f1_nonsexist = f1_for(Label::NonSexist);
  rep.macro_f1 = (rep.f1_sexist + rep.f1_nonsexist) / 2.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i] == predicted[i]) ++correct;
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  return rep;
}

namespace {

struct FeatureSet {
  std::vector<Vec> x;
  std::vector<Label> y;
};

FeatureSet featurize(const EmbeddingSpace& space, const LabeledDataset& data,
                     int split) {
  FeatureSet out;
  for (std::size_t i : data.split_indices(split)) {
    out.x.push_back(embed_text(space, data.records[i].text));
    out.y.push_back(data.records[i].label);
  }
  return out;
}

std::vector<Label> predict_all(const LinearModel& m, const FeatureSet& fs) {
  std::vector<Label> out;
  for (const auto& x : fs.x)
    out.push_back(m.predict_proba(x) >= 0.5 ? Label::Sexist : Label::NonSexist);
  return out;
}

}  // namespace

LinearModel train_proxy_classifier(const EmbeddingSpace& space,
                                   const LabeledDataset& data, int epochs,
                                   double learning_rate, std::uint64_t seed,
                                   ClassifierTrainStats* stats) {
  const FeatureSet train = featurize(space, data, 0);
  const FeatureSet val = featurize(space, data, 1);
  if (train.x.empty()) throw std::runtime_error("empty training split");
  bool has_pos = false, has_neg = false;
  for (Label l : train.y) {
    has_pos = has_pos || l == Label::Sexist;
    has_neg = has_neg || l == Label::NonSexist;
  }
  if (!has_pos || !has_neg)
    throw std::runtime_error("training split is single-class");

  const std::size_t d = space.dim;
  LinearModel model;
  model.weights.assign(d, 0.0);
  Rng rng(seed);
  for (auto& w : model.weights) w = 0.01 * rng.normal();
  model.bias = 0.0;

  LinearModel best = model;
  ClassifierTrainStats local;
  const double inv_n = 1.0 / static_cast<double>(train.x.size());

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Vec grad_w(d, 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < train.x.size(); ++i) {
      const double p = model.predict_proba(train.x[i]);
      const double err = p - (train.y[i] == Label::Sexist ? 1.0 : 0.0);
      axpy(err * inv_n, train.x[i], grad_w);
      grad_b += err * inv_n;
    }
    axpy(-learning_rate, grad_w, model.weights);
    model.bias -= learning_rate * grad_b;

    if (!val.x.empty()) {
      const auto rep = classification_metrics(val.y, predict_all(model, val));
      if (rep.macro_f1 > local.best_val_macro_f1) {
        local.best_val_macro_f1 = rep.macro_f1;
        local.best_epoch = epoch;
        best = model;
      }
    }
  }
  if (val.x.empty()) best = model;
  if (stats) *stats = local;
  return best;
}

ClassificationReport eval_classifier(const LinearModel& model,
                                     const EmbeddingSpace& space,
                                     const LabeledDataset& data) {
  const FeatureSet test = featurize(space, data, 2);
  if (test.x.empty()) throw std::runtime_error("empty test split");
  return classification_metrics(test.y, predict_all(model, test));
}

SeedStudy classifier_seed_study(const EmbeddingSpace& space,
                                const LabeledDataset& data, int epochs,
                                double learning_rate, std::uint64_t base_seed,
                                int runs) {
  if (runs < 1) throw std::runtime_error("need at least one run");
  SeedStudy study;
  for (int r = 0; r < runs; ++r) {
    const auto model = train_proxy_classifier(space, data, epochs,
                                              learning_rate, base_seed + r);
    study.per_seed.push_back(eval_classifier(model, space, data));
  }
  const double n = static_cast<double>(runs);
  for (const auto& rep : study.per_seed) {
    study.mean_macro_f1 += rep.macro_f1 / n;
    study.mean_accuracy += rep.accuracy / n;
  }
  for (const auto& rep : study.per_seed) {
    study.std_macro_f1 +=
        (rep.macro_f1 - study.mean_macro_f1) * (rep.macro_f1 - study.mean_macro_f1) / n;
    study.std_accuracy +=
        (rep.accuracy - study.mean_accuracy) * (rep.accuracy - study.mean_accuracy) / n;
  }
  study.std_macro_f1 = std::sqrt(study.std_macro_f1);
  study.std_accuracy = std::sqrt(study.std_accuracy);
  return study;
}

ClusterReport cluster_report(const EmbeddingSpace& space,
                             const std::vector<std::string>& seeds,
                             std::size_t k,
                             const EmbeddingSpace& neighbor_source) {
  ClusterReport rep;
  std::set<std::string> point_set;
  for (std::size_t c = 0; c < seeds.size(); ++c) {
    const auto& seed = seeds[c];
    const auto rs = neighbor_source.find(seed);
    const auto rd = space.find(seed);
    if (!rs || !rd)
      throw std::runtime_error("cluster seed not in vocabulary: \"" + seed + "\"");

    ClusterReport::SeedCluster cluster;
    cluster.seed = seed;
    // k nearest neighbors excluding the seed row itself
    const auto ranked =
        nearest_neighbors(neighbor_source, neighbor_source.row(*rs),
                          std::min(k + 1, neighbor_source.size()));
    for (const auto& sw : ranked) {
      if (sw.row == *rs) continue;
      if (cluster.neighbors.size() >= k) break;
      cluster.neighbors.push_back(neighbor_source.words[sw.row]);
    }

    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& nb : cluster.neighbors) {
      const auto rn = space.find(nb);
      if (!rn) continue;  // neighbor vanished from the evaluated space
      sum += 1.0 - cosine_similarity(space.row(*rd), space.row(*rn));
      ++counted;
    }
    cluster.local_dist = counted == 0 ? 0.0 : sum / static_cast<double>(counted);
    rep.overall_local_dist += cluster.local_dist;

    if (point_set.insert(seed).second) rep.points.emplace_back(seed, c);
    else ++rep.overlap_count;
    for (const auto& nb : cluster.neighbors) {
      if (point_set.insert(nb).second) rep.points.emplace_back(nb, c);
      else ++rep.overlap_count;
    }
    rep.clusters.push_back(std::move(cluster));
  }
  if (!rep.clusters.empty())
    rep.overall_local_dist /= static_cast<double>(rep.clusters.size());
  return rep;
}

}  // namespace sexwes
