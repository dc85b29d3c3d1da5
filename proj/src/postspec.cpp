#include "sexwes/postspec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "sexwes/optim.hpp"

namespace sexwes {

namespace {

constexpr int kModelFormatVersion = 1;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double stable_bce(double logit, double label) {
  return std::max(logit, 0.0) - logit * label +
         std::log1p(std::exp(-std::abs(logit)));
}

double safe_cos(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a), nb = norm(b);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return dot(a, b) / (na * nb);
}

// d cos(o, v) / d o, accumulated with a coefficient.
void add_cos_grad(double coeff, std::span<const double> o,
                  std::span<const double> v, Vec& grad_o) {
  const double no = norm(o), nv = norm(v);
  if (no < 1e-12 || nv < 1e-12) return;
  const double c = dot(o, v) / (no * nv);
  for (std::size_t i = 0; i < o.size(); ++i)
    grad_o[i] += coeff * (v[i] / (no * nv) - c * o[i] / (no * no));
}

// Per-output margin-loss gradient: sum over confounders of active hinges.
double mm_terms_for_output(std::span<const double> out,
                           std::span<const double> gold,
                           const std::vector<Vec>& confounders, double margin,
                           Vec* grad_out) {
  double loss = 0.0;
  const double cos_gold = safe_cos(out, gold);
  for (const auto& conf : confounders) {
    const double v = margin - cos_gold + safe_cos(out, conf);
    if (v > 0.0) {
      loss += v;
      if (grad_out) {
        add_cos_grad(-1.0, out, gold, *grad_out);
        add_cos_grad(1.0, out, conf, *grad_out);
      }
    }
  }
  return loss;
}

// || a - b || and its gradient wrt a.
double euclid_and_grad(std::span<const double> a, std::span<const double> b,
                       Vec* grad_a) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  const double dist = std::sqrt(sq);
  if (grad_a && dist > 1e-12)
    for (std::size_t i = 0; i < a.size(); ++i)
      (*grad_a)[i] += (a[i] - b[i]) / dist;
  return dist;
}

std::vector<std::size_t> net_sizes(std::size_t dim, const PostSpecConfig& cfg,
                                   bool discriminator) {
  std::vector<std::size_t> sizes{dim};
  for (int l = 0; l < cfg.hidden_layers; ++l)
    sizes.push_back(static_cast<std::size_t>(cfg.hidden_units));
  sizes.push_back(discriminator ? 1 : dim);
  return sizes;
}

}  // namespace

MappingModel init_mapping(std::size_t dim, const PostSpecConfig& cfg) {
  Rng rng(splitmix64(cfg.seed ^ 0x90570000ULL));
  MappingModel m;
  m.dim = dim;
  m.config_echo = cfg;
  m.g = Mlp::create(net_sizes(dim, cfg, false), rng);
  m.f = Mlp::create(net_sizes(dim, cfg, false), rng);
  m.d_spec = Mlp::create(net_sizes(dim, cfg, true), rng);
  m.d_plain = Mlp::create(net_sizes(dim, cfg, true), rng);
  return m;
}

double mm_loss(const std::vector<Vec>& g_out, const std::vector<Vec>& f_out,
               const std::vector<Vec>& cycle_gf_out,
               const std::vector<Vec>& cycle_fg_out,
               const std::vector<Vec>& gold,
               const std::vector<std::vector<Vec>>& confounders, double margin) {
  const std::size_t n = gold.size();
  if (g_out.size() != n || f_out.size() != n || cycle_gf_out.size() != n ||
      cycle_fg_out.size() != n || confounders.size() != n)
    throw std::runtime_error("mm_loss: batch size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto* out : {&g_out[i], &f_out[i], &cycle_gf_out[i], &cycle_fg_out[i]})
      loss += mm_terms_for_output(*out, gold[i], confounders[i], margin, nullptr);
  }
  return loss;
}

GeneratorLossParts generator_loss(const MappingModel& model,
                                  const PostSpecBatch& batch,
                                  const PostSpecConfig& cfg, Vec* g_grads,
                                  Vec* f_grads, Rng* dropout_rng) {
  const std::size_t n = batch.plain.size();
  if (batch.gold.size() != n || batch.confounders.size() != n)
    throw std::runtime_error("generator_loss: batch size mismatch");
  const bool want_grads = g_grads != nullptr && f_grads != nullptr;
  if (want_grads) {
    g_grads->assign(model.g.params().size(), 0.0);
    f_grads->assign(model.f.params().size(), 0.0);
  }
  const double gd = cfg.generator_dropout;
  const double inv_n = 1.0 / static_cast<double>(n);

  GeneratorLossParts parts;
  Vec scratch_d;  // discriminator grads discarded in the generator step
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& x = batch.plain[i];
    const Vec& gold = batch.gold[i];
    const auto& conf = batch.confounders[i];
    const Vec& margin_f_input = cfg.literal_margin_inputs ? x : gold;

    MlpCache cg1, cf2, cg3, cf4, cf5, cg6;
    const Vec g1 = model.g.forward(x, &cg1, dropout_rng, gd);
    const Vec f2 = model.f.forward(margin_f_input, &cf2, dropout_rng, gd);
    const Vec g3 = model.g.forward(f2, &cg3, dropout_rng, gd);
    const Vec f4 = model.f.forward(g1, &cf4, dropout_rng, gd);
    const Vec f5 = model.f.forward(gold, &cf5, dropout_rng, gd);
    const Vec g6 = model.g.forward(f5, &cg6, dropout_rng, gd);

    Vec dg1(model.dim, 0.0), df2(model.dim, 0.0), dg3(model.dim, 0.0),
        df4(model.dim, 0.0), df5(model.dim, 0.0), dg6(model.dim, 0.0);

    // margin ranking terms over the four mapped outputs
    double mm = 0.0;
    mm += mm_terms_for_output(g1, gold, conf, cfg.margin,
                              want_grads ? &dg1 : nullptr);
    mm += mm_terms_for_output(f2, gold, conf, cfg.margin,
                              want_grads ? &df2 : nullptr);
    mm += mm_terms_for_output(g3, gold, conf, cfg.margin,
                              want_grads ? &dg3 : nullptr);
    mm += mm_terms_for_output(f4, gold, conf, cfg.margin,
                              want_grads ? &df4 : nullptr);
    parts.mm += mm;
    const double wm = cfg.w_mm * inv_n;
    if (want_grads) {
      scale_inplace(dg1, wm);
      scale_inplace(df2, wm);
      scale_inplace(dg3, wm);
      scale_inplace(df4, wm);
    }

    // cycle reconstruction distances
    const double wc = cfg.w_cycle * inv_n;
    Vec dcyc4(model.dim, 0.0), dcyc6(model.dim, 0.0);
    double cycle = 0.0;
    cycle += euclid_and_grad(f4, x, want_grads ? &dcyc4 : nullptr);
    cycle += euclid_and_grad(g6, gold, want_grads ? &dcyc6 : nullptr);
    parts.cycle += cycle;
    if (want_grads) {
      axpy(wc, dcyc4, df4);
      axpy(wc, dcyc6, dg6);
    }

    // adversarial feedback (discriminators frozen, no dropout)
    const double wa = cfg.w_adv * inv_n;
    double adv = 0.0;
    {
      MlpCache cd;
      const Vec zs = model.d_spec.forward(g1, &cd);
      double dlogit;
      if (cfg.least_squares_adv) {
        const double p = sigmoid(zs[0]);
        adv += (p - 1.0) * (p - 1.0);
        dlogit = 2.0 * (p - 1.0) * p * (1.0 - p);
      } else {
        adv += stable_bce(zs[0], 1.0);
        dlogit = sigmoid(zs[0]) - 1.0;
      }
      if (want_grads) {
        scratch_d.assign(model.d_spec.params().size(), 0.0);
        const Vec din = model.d_spec.backward(cd, Vec{dlogit}, scratch_d);
        axpy(wa, din, dg1);
      }
    }
    {
      MlpCache cd;
      const Vec zp = model.d_plain.forward(f5, &cd);
      double dlogit;
      if (cfg.least_squares_adv) {
        const double p = sigmoid(zp[0]);
        adv += (p - 1.0) * (p - 1.0);
        dlogit = 2.0 * (p - 1.0) * p * (1.0 - p);
      } else {
        adv += stable_bce(zp[0], 1.0);
        dlogit = sigmoid(zp[0]) - 1.0;
      }
      if (want_grads) {
        scratch_d.assign(model.d_plain.params().size(), 0.0);
        const Vec din = model.d_plain.backward(cd, Vec{dlogit}, scratch_d);
        axpy(wa, din, df5);
      }
    }
    parts.adv += adv;

    if (want_grads) {
      // backprop in dependency order: g6 <- f5, g3 <- f2, f4 <- g1
      const Vec din6 = model.g.backward(cg6, dg6, *g_grads);
      axpy(1.0, din6, df5);
      model.f.backward(cf5, df5, *f_grads);

      const Vec din3 = model.g.backward(cg3, dg3, *g_grads);
      axpy(1.0, din3, df2);
      model.f.backward(cf2, df2, *f_grads);

      const Vec din4 = model.f.backward(cf4, df4, *f_grads);
      axpy(1.0, din4, dg1);
      model.g.backward(cg1, dg1, *g_grads);
    }
  }

  parts.total = (cfg.w_mm * parts.mm + cfg.w_cycle * parts.cycle +
                 cfg.w_adv * parts.adv) *
                inv_n;
  return parts;
}

DiscriminatorLossParts discriminator_loss(const MappingModel& model,
                                          const PostSpecBatch& batch,
                                          const PostSpecConfig& cfg,
                                          Vec* d_spec_grads, Vec* d_plain_grads,
                                          Rng* dropout_rng) {
  const std::size_t n = batch.plain.size();
  const bool want_grads = d_spec_grads != nullptr && d_plain_grads != nullptr;
  if (want_grads) {
    d_spec_grads->assign(model.d_spec.params().size(), 0.0);
    d_plain_grads->assign(model.d_plain.params().size(), 0.0);
  }
  const double dd = cfg.discriminator_dropout;
  const double inv_n = 1.0 / static_cast<double>(n);

  DiscriminatorLossParts parts;
  const auto judge = [&](const Mlp& d, std::span<const double> input,
                         double label, Vec* grads) {
    MlpCache cache;
    const Vec z = d.forward(input, &cache, dropout_rng, dd);
    double loss, dlogit;
    if (cfg.least_squares_adv) {
      const double p = sigmoid(z[0]);
      loss = (p - label) * (p - label);
      dlogit = 2.0 * (p - label) * p * (1.0 - p);
    } else {
      loss = stable_bce(z[0], label);
      dlogit = sigmoid(z[0]) - label;
    }
    if (grads) d.backward(cache, Vec{dlogit * inv_n}, *grads);
    return loss;
  };

  for (std::size_t i = 0; i < n; ++i) {
    // generator outputs are inference-mode inputs here
    const Vec fake_spec = model.g.forward(batch.plain[i]);
    const Vec fake_plain = model.f.forward(batch.gold[i]);
    parts.d_spec += judge(model.d_spec, batch.gold[i], 1.0, d_spec_grads);
    parts.d_spec += judge(model.d_spec, fake_spec, 0.0, d_spec_grads);
    parts.d_plain += judge(model.d_plain, batch.plain[i], 1.0, d_plain_grads);
    parts.d_plain += judge(model.d_plain, fake_plain, 0.0, d_plain_grads);
  }
  parts.d_spec *= inv_n;
  parts.d_plain *= inv_n;
  parts.total = parts.d_spec + parts.d_plain;
  return parts;
}

namespace {

struct SeenItem {
  Vec plain, gold;
};

// Held-out margin loss with a fixed confounder assignment.
double heldout_mm(const MappingModel& model, const std::vector<SeenItem>& held,
                  const std::vector<std::vector<Vec>>& held_conf,
                  const PostSpecConfig& cfg) {
  std::vector<Vec> g_out, f_out, gf_out, fg_out, gold;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const Vec& f_in =
        cfg.literal_margin_inputs ? held[i].plain : held[i].gold;
    const Vec g1 = model.g.forward(held[i].plain);
    const Vec f2 = model.f.forward(f_in);
    g_out.push_back(g1);
    f_out.push_back(f2);
    gf_out.push_back(model.g.forward(f2));
    fg_out.push_back(model.f.forward(g1));
    gold.push_back(held[i].gold);
  }
  return mm_loss(g_out, f_out, gf_out, fg_out, gold, held_conf, cfg.margin);
}

}  // namespace

MappingModel train_postspec(const EmbeddingSpace& plain,
                            const EmbeddingSpace& ar_specialised,
                            const std::vector<std::string>& seen,
                            const PostSpecConfig& cfg,
                            PostSpecTrainStats* stats,
                            const std::string& log_csv_path) {
  if (plain.dim != ar_specialised.dim)
    throw std::runtime_error("plain and specialised spaces differ in dimension");
  if (seen.size() < static_cast<std::size_t>(cfg.batch_size))
    throw std::runtime_error("seen vocabulary smaller than one batch");

  std::vector<SeenItem> items;
  std::vector<std::string> names;
  for (const auto& w : seen) {
    const auto rp = plain.find(w);
    const auto rs = ar_specialised.find(w);
    if (!rp || !rs)
      throw std::runtime_error("seen word missing from a space: \"" + w + "\"");
    items.push_back({Vec(plain.row(*rp).begin(), plain.row(*rp).end()),
                     Vec(ar_specialised.row(*rs).begin(),
                         ar_specialised.row(*rs).end())});
    names.push_back(w);
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> perm(items.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  {
    std::vector<SeenItem> shuffled;
    std::vector<std::string> shuffled_names;
    for (std::size_t idx : perm) {
      shuffled.push_back(std::move(items[idx]));
      shuffled_names.push_back(std::move(names[idx]));
    }
    items = std::move(shuffled);
    names = std::move(shuffled_names);
  }
  const std::size_t n_held = std::max<std::size_t>(1, items.size() / 10);
  std::vector<SeenItem> held(items.end() - n_held, items.end());
  items.resize(items.size() - n_held);

  const std::size_t k = static_cast<std::size_t>(cfg.confounders);
  if (k + 1 > items.size())
    throw std::runtime_error("confounder count exceeds the training pool");

  PostSpecTrainStats local;
  local.seen_train = items.size();
  local.seen_heldout = held.size();
  local.heldout_words.assign(names.end() - static_cast<long>(n_held), names.end());

  // fixed confounders for the held-out metric, drawn from the training pool
  std::vector<std::vector<Vec>> held_conf(held.size());
  {
    Rng conf_rng(splitmix64(cfg.seed ^ 0xc04fULL));
    for (auto& list : held_conf) {
      std::set<std::size_t> chosen;
      while (chosen.size() < k) chosen.insert(conf_rng.index(items.size()));
      for (std::size_t idx : chosen) list.push_back(items[idx].gold);
    }
  }

  MappingModel model = init_mapping(plain.dim, cfg);
  AdamState adam_g(model.g.params().size());
  AdamState adam_f(model.f.params().size());
  AdamState adam_ds(model.d_spec.params().size());
  AdamState adam_dp(model.d_plain.params().size());

  double best_mm = heldout_mm(model, held, held_conf, cfg);
  local.initial_heldout_mm = best_mm;
  MappingModel best_model = model;
  int best_epoch = -1;

  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  Vec g_grads, f_grads, ds_grads, dp_grads;
  std::ofstream log;
  if (!log_csv_path.empty()) {
    log.open(log_csv_path, std::ios::binary);
    if (!log) throw std::runtime_error("cannot open log: " + log_csv_path);
    log << "epoch,mm,cycle,adv,disc,heldout_mm\n";
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double ep_mm = 0.0, ep_cycle = 0.0, ep_adv = 0.0, ep_disc = 0.0;
    std::size_t n_batches = 0;

    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      if (stop - start < 2) break;  // margin terms need at least one confounder
      PostSpecBatch batch;
      std::set<std::size_t> in_batch;
      for (std::size_t i = start; i < stop; ++i) in_batch.insert(order[i]);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& item = items[order[i]];
        batch.plain.push_back(item.plain);
        batch.gold.push_back(item.gold);
        // confounders: gold vectors of words outside the batch
        std::set<std::size_t> chosen;
        while (chosen.size() < k) {
          const std::size_t c = rng.index(items.size());
          if (!in_batch.count(c)) chosen.insert(c);
        }
        std::vector<Vec> conf;
        for (std::size_t idx : chosen) conf.push_back(items[idx].gold);
        batch.confounders.push_back(std::move(conf));
      }

      const auto d_parts =
          discriminator_loss(model, batch, cfg, &ds_grads, &dp_grads, &rng);
      adam_ds.step(model.d_spec.params(), ds_grads, cfg.learning_rate);
      adam_dp.step(model.d_plain.params(), dp_grads, cfg.learning_rate);

      const auto g_parts =
          generator_loss(model, batch, cfg, &g_grads, &f_grads, &rng);
      adam_g.step(model.g.params(), g_grads, cfg.learning_rate);
      adam_f.step(model.f.params(), f_grads, cfg.learning_rate);

      if (!std::isfinite(g_parts.total) || !std::isfinite(d_parts.total))
        throw std::runtime_error(
            "post-specialisation diverged (non-finite loss); lower the "
            "learning rate");

      ep_mm += g_parts.mm;
      ep_cycle += g_parts.cycle;
      ep_adv += g_parts.adv;
      ep_disc += d_parts.total;
      ++n_batches;
    }

    const double h_mm = heldout_mm(model, held, held_conf, cfg);
    local.epoch_losses.push_back({ep_mm / n_batches, ep_cycle / n_batches,
                                  ep_adv / n_batches, ep_disc / n_batches});
    if (log)
      log << epoch << ',' << format_double(ep_mm / n_batches) << ','
          << format_double(ep_cycle / n_batches) << ','
          << format_double(ep_adv / n_batches) << ','
          << format_double(ep_disc / n_batches) << ',' << format_double(h_mm)
          << '\n';
    if (h_mm < best_mm) {
      best_mm = h_mm;
      best_model = model;
      best_epoch = epoch;
    }
  }

  local.best_epoch = best_epoch;
  local.best_heldout_mm = best_mm;
  if (stats) *stats = local;
  return best_model;
}

EmbeddingSpace apply_mapping(const MappingModel& model,
                             const EmbeddingSpace& space,
                             const std::vector<std::string>* splice_seen_words,
                             const EmbeddingSpace* splice_source) {
  if (space.dim != model.dim)
    throw std::runtime_error("apply_mapping: dimension mismatch");
  if (space.mapping_applied)
    std::cerr << "warning: applying the specialisation mapping to a space "
                 "that was already mapped\n";

  EmbeddingSpace out = space;
  out.mapping_applied = true;
  for (std::size_t r = 0; r < space.size(); ++r) {
    const Vec y = model.g.forward(space.row(r));
    if (!all_finite(y))
      throw std::runtime_error("apply_mapping: non-finite output for \"" +
                               space.words[r] + "\"");
    std::copy(y.begin(), y.end(), out.data.begin() + r * space.dim);
  }
  if (splice_seen_words && splice_source) {
    for (const auto& w : *splice_seen_words) {
      const auto rd = out.find(w);
      const auto rs = splice_source->find(w);
      if (rd && rs)
        std::copy(splice_source->row(*rs).begin(), splice_source->row(*rs).end(),
                  out.data.begin() + *rd * out.dim);
    }
  }
  return out;
}

void MappingModel::save(const std::string& path) const {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["model_type"] = "postspec_mapping";
  j["dim"] = dim;
  j["config"] = {
      {"hidden_layers", config_echo.hidden_layers},
      {"hidden_units", config_echo.hidden_units},
      {"generator_dropout", config_echo.generator_dropout},
      {"discriminator_dropout", config_echo.discriminator_dropout},
      {"margin", config_echo.margin},
      {"confounders", config_echo.confounders},
      {"learning_rate", config_echo.learning_rate},
      {"epochs", config_echo.epochs},
      {"batch_size", config_echo.batch_size},
      {"w_mm", config_echo.w_mm},
      {"w_cycle", config_echo.w_cycle},
      {"w_adv", config_echo.w_adv},
      {"seed", config_echo.seed},
      {"literal_margin_inputs", config_echo.literal_margin_inputs},
      {"least_squares_adv", config_echo.least_squares_adv},
      {"splice_seen", config_echo.splice_seen},
  };
  const auto dump_net = [](const Mlp& net) {
    return nlohmann::json{{"sizes", MlpSerde::sizes(net)},
                          {"params", net.params()}};
  };
  j["g"] = dump_net(g);
  j["f"] = dump_net(f);
  j["d_spec"] = dump_net(d_spec);
  j["d_plain"] = dump_net(d_plain);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump();
}

MappingModel MappingModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format_version", -1) != kModelFormatVersion ||
      j.value("model_type", "") != "postspec_mapping")
    throw std::runtime_error("not a supported mapping model file: " + path);

  MappingModel m;
  m.dim = j["dim"].get<std::size_t>();
  const auto& c = j["config"];
  m.config_echo.hidden_layers = c["hidden_layers"].get<int>();
  m.config_echo.hidden_units = c["hidden_units"].get<int>();
  m.config_echo.generator_dropout = c["generator_dropout"].get<double>();
  m.config_echo.discriminator_dropout = c["discriminator_dropout"].get<double>();
  m.config_echo.margin = c["margin"].get<double>();
  m.config_echo.confounders = c["confounders"].get<int>();
  m.config_echo.learning_rate = c["learning_rate"].get<double>();
  m.config_echo.epochs = c["epochs"].get<int>();
  m.config_echo.batch_size = c["batch_size"].get<int>();
  m.config_echo.w_mm = c["w_mm"].get<double>();
  m.config_echo.w_cycle = c["w_cycle"].get<double>();
  m.config_echo.w_adv = c["w_adv"].get<double>();
  m.config_echo.seed = c["seed"].get<std::uint64_t>();
  m.config_echo.literal_margin_inputs = c["literal_margin_inputs"].get<bool>();
  m.config_echo.least_squares_adv = c["least_squares_adv"].get<bool>();
  m.config_echo.splice_seen = c["splice_seen"].get<bool>();
  const auto load_net = [&](const char* key) {
    return MlpSerde::from_params(
        j[key]["sizes"].get<std::vector<std::size_t>>(),
        j[key]["params"].get<Vec>());
  };
  m.g = load_net("g");
  m.f = load_net("f");
  m.d_spec = load_net("d_spec");
  m.d_plain = load_net("d_plain");
  return m;
}

}  // namespace sexwes
