#include "sexwes/stm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sexwes/optim.hpp"

namespace sexwes {

namespace {

constexpr int kModelFormatVersion = 1;

double stable_bce(double logit, double label) {
  // max(z,0) - z*y + log(1 + exp(-|z|))
  return std::max(logit, 0.0) - logit * label +
         std::log1p(std::exp(-std::abs(logit)));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// One directed forward pass; caches stay local to the caller.
struct Forward {
  std::vector<Vec> u, v;        // specialised vectors after tanh (and dropout)
  std::vector<Vec> tanh_a, tanh_b;
  std::vector<Vec> mask_a, mask_b;  // empty when dropout off
  Vec slice_scores;
  double logit = 0.0;
};

void specialise_input(const StmModel& m, int k, std::span<const double> x,
                      Vec& tanh_out) {
  const std::size_t d = m.dim, h = m.hidden;
  const auto p = m.proj(k);  // d x h, row-major
  tanh_out.assign(h, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = p.data() + i * h;
    for (std::size_t j = 0; j < h; ++j) tanh_out[j] += xi * row[j];
  }
  for (double& t : tanh_out) t = std::tanh(t);
}

Forward forward_pass(const StmModel& m, std::span<const double> a,
                     std::span<const double> b, Rng* dropout_rng,
                     double dropout) {
  const std::size_t h = m.hidden;
  const int K = m.num_tensors;
  Forward f;
  f.u.resize(K);
  f.v.resize(K);
  f.tanh_a.resize(K);
  f.tanh_b.resize(K);
  if (dropout_rng) {
    f.mask_a.resize(K);
    f.mask_b.resize(K);
  }
  f.slice_scores.assign(K, 0.0);

  const double keep = 1.0 - dropout;
  for (int k = 0; k < K; ++k) {
    specialise_input(m, k, a, f.tanh_a[k]);
    specialise_input(m, k, b, f.tanh_b[k]);
    f.u[k] = f.tanh_a[k];
    f.v[k] = f.tanh_b[k];
    if (dropout_rng) {
      f.mask_a[k].assign(h, 0.0);
      f.mask_b[k].assign(h, 0.0);
      for (std::size_t j = 0; j < h; ++j) {
        f.mask_a[k][j] = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        f.mask_b[k][j] = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        f.u[k][j] *= f.mask_a[k][j];
        f.v[k][j] *= f.mask_b[k][j];
      }
    }
    const auto bk = m.bilinear(k);  // h x h
    double s = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
      const double ui = f.u[k][i];
      if (ui == 0.0) continue;
      const double* row = bk.data() + i * h;
      double acc = 0.0;
      for (std::size_t j = 0; j < h; ++j) acc += row[j] * f.v[k][j];
      s += ui * acc;
    }
    f.slice_scores[k] = s;
  }

  const auto w = m.out_weights();
  f.logit = m.bias();
  for (int k = 0; k < K; ++k) f.logit += w[k] * f.slice_scores[k];
  return f;
}

// Backpropagates dL/dlogit through one forward pass into the flat gradient.
void backward_pass(const StmModel& m, std::span<const double> a,
                   std::span<const double> b, const Forward& f, double dlogit,
                   Vec& grads) {
  const std::size_t d = m.dim, h = m.hidden;
  const int K = m.num_tensors;
  const std::size_t proj_sz = m.proj_size();
  const std::size_t bil_sz = m.bilinear_size();
  const std::size_t bil_base = static_cast<std::size_t>(K) * proj_sz;
  const std::size_t w_base = bil_base + static_cast<std::size_t>(K) * bil_sz;

  const auto w = m.out_weights();
  grads[w_base + K] += dlogit;  // bias

  Vec du(h), dv(h);
  for (int k = 0; k < K; ++k) {
    grads[w_base + k] += dlogit * f.slice_scores[k];
    const double ds = dlogit * w[k];

    const auto bk = m.bilinear(k);
    double* gb = grads.data() + bil_base + static_cast<std::size_t>(k) * bil_sz;
    std::fill(du.begin(), du.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    for (std::size_t i = 0; i < h; ++i) {
      const double ui = f.u[k][i];
      const double* brow = bk.data() + i * h;
      double acc = 0.0;
      for (std::size_t j = 0; j < h; ++j) {
        gb[i * h + j] += ds * ui * f.v[k][j];
        acc += brow[j] * f.v[k][j];
        dv[j] += ds * ui * brow[j];
      }
      du[i] = ds * acc;
    }

    // through dropout masks and tanh
    for (std::size_t j = 0; j < h; ++j) {
      const double ma = f.mask_a.empty() ? 1.0 : f.mask_a[k][j];
      const double mb = f.mask_b.empty() ? 1.0 : f.mask_b[k][j];
      const double ta = f.tanh_a[k][j];
      const double tb = f.tanh_b[k][j];
      du[j] *= ma * (1.0 - ta * ta);
      dv[j] *= mb * (1.0 - tb * tb);
    }

    double* gp = grads.data() + static_cast<std::size_t>(k) * proj_sz;
    for (std::size_t i = 0; i < d; ++i) {
      const double ai = a[i];
      const double bi = b[i];
      double* row = gp + i * h;
      for (std::size_t j = 0; j < h; ++j)
        row[j] += ai * du[j] + bi * dv[j];
    }
  }
}

}  // namespace

const char* to_string(StmKind k) {
  switch (k) {
    case StmKind::Ga: return "Ga";
    case StmKind::Gr: return "Gr";
    case StmKind::Da: return "Da";
    case StmKind::Dr: return "Dr";
    case StmKind::Dcl: return "Dcl";
  }
  return "?";
}

std::optional<Vec> PairEmbedder::embed(const TaggedTerm& term) const {
  const EmbeddingSpace* space = nullptr;
  bool project = false;
  if (term.lang == langs.target) {
    space = tgt;
  } else if (term.lang == langs.source) {
    if (!src || !projection)
      throw std::runtime_error(
          "source-language term but no source space/projection configured");
    space = src;
    project = true;
  } else {
    throw std::runtime_error("unknown language tag \"" + term.lang + "\"");
  }

  Vec x;
  if (auto r = space->find(term.surface)) {
    x.assign(space->row(*r).begin(), space->row(*r).end());
  } else {
    const auto toks = term.tokens();
    bool any = false;
    for (const auto& t : toks) any = any || space->contains(t);
    if (!any) return std::nullopt;
    x = phrase_vector(*space, toks);
  }
  if (project) x = matvec(projection->w, x);
  const double n = norm(x);
  if (n == 0.0) return std::nullopt;
  scale_inplace(x, 1.0 / n);
  return x;
}

TaggedTerm PairEmbedder::random_term(Rng& rng, const std::string& lang) const {
  const EmbeddingSpace* space = lang == langs.source ? src : tgt;
  if (!space) throw std::runtime_error("no space for language \"" + lang + "\"");
  return {lang, space->words[rng.index(space->size())]};
}

double StmModel::score_pair(std::span<const double> a,
                            std::span<const double> b) const {
  if (a.size() != dim || b.size() != dim)
    throw std::runtime_error("score_pair: vector dimension mismatch");
  const double p1 = sigmoid(forward_pass(*this, a, b, nullptr, 0.0).logit);
  if (!symmetrize) return p1;
  const double p2 = sigmoid(forward_pass(*this, b, a, nullptr, 0.0).logit);
  return 0.5 * (p1 + p2);
}

StmModel init_stm(std::size_t dim, const StmConfig& cfg, StmKind kind) {
  StmModel m;
  m.num_tensors = cfg.num_tensors;
  m.dim = dim;
  m.hidden = static_cast<std::size_t>(cfg.hidden_size);
  m.symmetrize = cfg.symmetrize;
  m.kind = kind;
  m.config_echo = cfg;
  m.params.assign(m.param_count(), 0.0);

  Rng rng(splitmix64(cfg.seed ^ 0x57350000ULL));
  const double proj_scale = std::sqrt(6.0 / static_cast<double>(dim + m.hidden));
  const std::size_t proj_total = static_cast<std::size_t>(m.num_tensors) * m.proj_size();
  for (std::size_t i = 0; i < proj_total; ++i)
    m.params[i] = rng.uniform(-proj_scale, proj_scale);
  const double bil_scale = 1.0 / std::sqrt(static_cast<double>(m.hidden));
  const std::size_t bil_total = static_cast<std::size_t>(m.num_tensors) * m.bilinear_size();
  for (std::size_t i = 0; i < bil_total; ++i)
    m.params[proj_total + i] = rng.uniform(-bil_scale, bil_scale);
  for (int k = 0; k < m.num_tensors; ++k)
    m.params[proj_total + bil_total + k] = rng.uniform(-0.5, 0.5);
  m.params.back() = 0.0;
  return m;
}

double stm_batch_loss(const StmModel& model, std::span<const StmExample> batch) {
  double loss = 0.0;
  for (const auto& ex : batch)
    loss += stable_bce(forward_pass(model, ex.a, ex.b, nullptr, 0.0).logit,
                       ex.label);
  return loss / static_cast<double>(batch.size());
}

double stm_batch_loss_and_grads(const StmModel& model,
                                std::span<const StmExample> batch, Vec& grads,
                                Rng* dropout_rng, double dropout) {
  if (grads.size() != model.param_count())
    grads.assign(model.param_count(), 0.0);
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const Forward f = forward_pass(model, ex.a, ex.b, dropout_rng, dropout);
    loss += stable_bce(f.logit, ex.label);
    const double dlogit = (sigmoid(f.logit) - ex.label) * inv;
    backward_pass(model, ex.a, ex.b, f, dlogit, grads);
  }
  return loss * inv;
}

namespace {

double heldout_accuracy(const StmModel& m, std::span<const StmExample> held) {
  std::size_t correct = 0;
  for (const auto& ex : held) {
    const double p = m.score_pair(ex.a, ex.b);
    if ((p >= 0.5) == (ex.label >= 0.5)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(held.size());
}

}  // namespace

StmModel train_stm(const ConstraintSet& positives,
                   const ConstraintSet* explicit_negatives,
                   const ConstraintSet* confusion_pool,
                   const PairEmbedder& embedder, const StmConfig& cfg,
                   StmKind kind, StmTrainStats* stats) {
  StmTrainStats local;
  std::vector<StmExample> examples;

  for (const auto& p : positives.pairs) {
    const auto va = embedder.embed(p.a);
    const auto vb = embedder.embed(p.b);
    if (va && vb) {
      examples.push_back({*va, *vb, 1.0});
      ++local.positives_resolved;
    } else {
      ++local.positives_skipped;
    }
  }
  if (local.positives_resolved < 10)
    throw std::runtime_error("fewer than 10 resolvable positive pairs (" +
                             std::to_string(local.positives_resolved) + ")");

  Rng rng(cfg.seed);
  const bool crosslingual = positives.group == Group::CrossLingual;
  const std::string lang_a =
      crosslingual ? embedder.langs.source : embedder.langs.target;
  const std::string lang_b = embedder.langs.target;

  if (explicit_negatives) {
    for (const auto& p : explicit_negatives->pairs) {
      const auto va = embedder.embed(p.a);
      const auto vb = embedder.embed(p.b);
      if (va && vb) examples.push_back({*va, *vb, 0.0});
    }
  } else {
    const std::size_t n_neg = local.positives_resolved;
    std::size_t want_confusion = 0;
    if (confusion_pool && !confusion_pool->pairs.empty())
      want_confusion = n_neg / 2;

    if (want_confusion > 0) {
      std::vector<std::size_t> order(confusion_pool->pairs.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      for (std::size_t idx : order) {
        if (local.negatives_confusion >= want_confusion) break;
        const auto& p = confusion_pool->pairs[idx];
        const auto va = embedder.embed(p.a);
        const auto vb = embedder.embed(p.b);
        if (!va || !vb) continue;
        examples.push_back({*va, *vb, 0.0});
        ++local.negatives_confusion;
      }
    }
    while (local.negatives_confusion + local.negatives_random < n_neg) {
      const TaggedTerm ta = embedder.random_term(rng, lang_a);
      const TaggedTerm tb = embedder.random_term(rng, lang_b);
      if (ta.serialized() == tb.serialized()) continue;
      const auto va = embedder.embed(ta);
      const auto vb = embedder.embed(tb);
      if (!va || !vb) continue;
      examples.push_back({*va, *vb, 0.0});
      ++local.negatives_random;
    }
  }

  rng.shuffle(examples);
  const std::size_t n_held = std::max<std::size_t>(1, examples.size() / 10);
  std::vector<StmExample> held(examples.end() - n_held, examples.end());
  examples.resize(examples.size() - n_held);
  if (examples.empty()) throw std::runtime_error("no training examples left");

  StmModel model = init_stm(embedder.dim(), cfg, kind);
  AdamState adam(model.param_count());
  Vec grads(model.param_count(), 0.0);

  // Early stopping tracks held-out cross-entropy (a finer signal than
  // accuracy on a small split); the best-loss parameters are returned.
  Vec best_params = model.params;
  double best_loss = stm_batch_loss(model, held);
  int best_epoch = -1;
  int since_best = 0;
  const int patience = 5;

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<StmExample> batch;
  for (int epoch = 0; epoch < cfg.max_iterations; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(examples[order[i]]);
        // pairs are unordered; random input-order swaps keep the scorer from
        // keying on argument position
        if (rng.bernoulli(0.5)) std::swap(batch.back().a, batch.back().b);
      }
      std::fill(grads.begin(), grads.end(), 0.0);
      stm_batch_loss_and_grads(model, batch, grads, &rng, cfg.dropout);
      adam.step(model.params, grads, cfg.learning_rate);
    }
    local.heldout_accuracy_per_epoch.push_back(heldout_accuracy(model, held));
    const double loss = stm_batch_loss(model, held);
    if (loss < best_loss) {
      best_loss = loss;
      best_params = model.params;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= patience) {
      break;
    }
  }

  model.params = std::move(best_params);
  local.heldout_accuracy = heldout_accuracy(model, held);
  local.best_epoch = best_epoch;
  if (stats) *stats = local;
  return model;
}

FilterResult filter_constraints(const StmModel& model,
                                const ConstraintSet& candidates,
                                const PairEmbedder& embedder,
                                double threshold) {
  FilterResult res;
  res.kept.relation = candidates.relation;
  res.kept.group = candidates.group;
  for (const auto& p : candidates.pairs) {
    const auto va = embedder.embed(p.a);
    const auto vb = embedder.embed(p.b);
    if (!va || !vb) {
      ++res.dropped_unresolvable;
      continue;
    }
    if (model.score_pair(*va, *vb) >= threshold) res.kept.insert(p);
    else ++res.dropped_below_threshold;
  }
  return res;
}

void StmModel::save(const std::string& path) const {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["model_type"] = "stm";
  j["kind"] = to_string(kind);
  j["num_tensors"] = num_tensors;
  j["dim"] = dim;
  j["hidden"] = hidden;
  j["symmetrize"] = symmetrize;
  j["config"] = {
      {"num_tensors", config_echo.num_tensors},
      {"hidden_size", config_echo.hidden_size},
      {"dropout", config_echo.dropout},
      {"batch_size", config_echo.batch_size},
      {"max_iterations", config_echo.max_iterations},
      {"learning_rate", config_echo.learning_rate},
      {"threshold", config_echo.threshold},
      {"seed", config_echo.seed},
      {"symmetrize", config_echo.symmetrize},
  };
  j["params"] = params;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump();
}

StmModel StmModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format_version", -1) != kModelFormatVersion ||
      j.value("model_type", "") != "stm")
    throw std::runtime_error("not a supported stm model file: " + path);

  StmModel m;
  m.num_tensors = j["num_tensors"].get<int>();
  m.dim = j["dim"].get<std::size_t>();
  m.hidden = j["hidden"].get<std::size_t>();
  m.symmetrize = j["symmetrize"].get<bool>();
  const std::string kind = j["kind"].get<std::string>();
  for (StmKind k : {StmKind::Ga, StmKind::Gr, StmKind::Da, StmKind::Dr,
                    StmKind::Dcl})
    if (kind == to_string(k)) m.kind = k;
  const auto& c = j["config"];
  m.config_echo.num_tensors = c["num_tensors"].get<int>();
  m.config_echo.hidden_size = c["hidden_size"].get<int>();
  m.config_echo.dropout = c["dropout"].get<double>();
  m.config_echo.batch_size = c["batch_size"].get<int>();
  m.config_echo.max_iterations = c["max_iterations"].get<int>();
  m.config_echo.learning_rate = c["learning_rate"].get<double>();
  m.config_echo.threshold = c["threshold"].get<double>();
  m.config_echo.seed = c["seed"].get<std::uint64_t>();
  m.config_echo.symmetrize = c["symmetrize"].get<bool>();
  m.params = j["params"].get<Vec>();
  if (m.params.size() != m.param_count())
    throw std::runtime_error("model parameter count mismatch in " + path);
  return m;
}

}  // namespace sexwes
