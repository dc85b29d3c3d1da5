#include "sexwes/attract_repel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace sexwes {

namespace {

double hinge(double x) { return x > 0.0 ? x : 0.0; }

double row_cos(const Mat& m, std::size_t i, std::size_t j) {
  return dot(m.row(i), m.row(j)) / (norm(m.row(i)) * norm(m.row(j)));
}

// All word rows appearing in other pairs of the batch, minus the pair's own.
std::vector<std::size_t> candidate_rows(const IndexPairList& batch,
                                        std::size_t self_idx) {
  std::set<std::size_t> cand;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (j == self_idx) continue;
    cand.insert(batch[j].first);
    cand.insert(batch[j].second);
  }
  cand.erase(batch[self_idx].first);
  cand.erase(batch[self_idx].second);
  return {cand.begin(), cand.end()};
}

std::size_t extreme_by_cos(const Mat& vectors,
                           const std::vector<std::size_t>& cand,
                           std::size_t anchor, bool nearest) {
  std::size_t best = cand.front();
  double best_cos = row_cos(vectors, anchor, best);
  for (std::size_t i = 1; i < cand.size(); ++i) {
    const double c = row_cos(vectors, anchor, cand[i]);
    if (nearest ? c > best_cos : c < best_cos) {
      best_cos = c;
      best = cand[i];
    }
  }
  return best;
}

std::size_t draw_from_pool(const std::vector<std::size_t>& pool,
                           std::size_t avoid_a, std::size_t avoid_b, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    const std::size_t pick = pool[rng.index(pool.size())];
    if (pick != avoid_a && pick != avoid_b) return pick;
  }
  throw std::runtime_error("cannot draw a negative: pool exhausted");
}

}  // namespace

IndexPairList select_negatives(const IndexPairList& batch_pairs,
                               const Mat& vectors, Relation relation,
                               const std::vector<std::size_t>& fallback_pool,
                               Rng& rng, std::vector<bool>* similarity_based) {
  const std::size_t n = batch_pairs.size();
  IndexPairList negatives(n);
  if (n == 0) return negatives;

  // a seeded half of the pairs gets similarity-based negatives
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<bool> sim_based(n, false);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) sim_based[order[i]] = true;
  if (similarity_based) *similarity_based = sim_based;

  const bool nearest = relation == Relation::Attract;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [a, b] = batch_pairs[i];
    const auto cand = candidate_rows(batch_pairs, i);
    if (cand.empty()) {
      if (fallback_pool.empty())
        throw std::runtime_error("no negative candidates available");
      negatives[i] = {draw_from_pool(fallback_pool, a, b, rng),
                      draw_from_pool(fallback_pool, a, b, rng)};
      continue;
    }
    if (sim_based[i]) {
      negatives[i] = {extreme_by_cos(vectors, cand, a, nearest),
                      extreme_by_cos(vectors, cand, b, nearest)};
    } else {
      negatives[i] = {cand[rng.index(cand.size())], cand[rng.index(cand.size())]};
    }
  }
  return negatives;
}

namespace {

std::set<std::size_t> batch_rows(const ArBatch& batch) {
  std::set<std::size_t> rows;
  for (const auto& [a, b] : batch.attract) {
    rows.insert(a);
    rows.insert(b);
  }
  for (const auto& [a, b] : batch.repel) {
    rows.insert(a);
    rows.insert(b);
  }
  for (const auto& [a, b] : batch.attract_neg) {
    rows.insert(a);
    rows.insert(b);
  }
  for (const auto& [a, b] : batch.repel_neg) {
    rows.insert(a);
    rows.insert(b);
  }
  return rows;
}

}  // namespace

ArLossParts ar_loss(const ArBatch& batch, const Mat& current,
                    const Mat& initial, const ArConfig& cfg) {
  if (batch.attract_neg.size() != batch.attract.size() ||
      batch.repel_neg.size() != batch.repel.size())
    throw std::runtime_error("ar_loss: negatives do not match batch pairs");

  ArLossParts parts;
  for (std::size_t i = 0; i < batch.attract.size(); ++i) {
    const auto [a, b] = batch.attract[i];
    const auto [ta, tb] = batch.attract_neg[i];
    if (!all_finite(current.row(a)) || !all_finite(current.row(b)))
      throw std::runtime_error("ar_loss: non-finite input vector");
    const double pair_dot = dot(current.row(a), current.row(b));
    parts.attract +=
        hinge(cfg.attract_margin + dot(current.row(a), current.row(ta)) - pair_dot);
    parts.attract +=
        hinge(cfg.attract_margin + dot(current.row(b), current.row(tb)) - pair_dot);
  }
  for (std::size_t i = 0; i < batch.repel.size(); ++i) {
    const auto [a, b] = batch.repel[i];
    const auto [ta, tb] = batch.repel_neg[i];
    const double pair_dot = dot(current.row(a), current.row(b));
    parts.repel +=
        hinge(cfg.repel_margin + pair_dot - dot(current.row(a), current.row(ta)));
    parts.repel +=
        hinge(cfg.repel_margin + pair_dot - dot(current.row(b), current.row(tb)));
  }
  for (std::size_t r : batch_rows(batch)) {
    double sq = 0.0;
    for (std::size_t j = 0; j < current.cols; ++j) {
      const double diff = initial[r][j] - current[r][j];
      sq += diff * diff;
    }
    parts.regularize += cfg.reg_lambda * sq;
  }
  parts.total = parts.attract + parts.repel + parts.regularize;
  return parts;
}

void ar_loss_grads(const ArBatch& batch, const Mat& current, const Mat& initial,
                   const ArConfig& cfg, std::map<std::size_t, Vec>& grads) {
  const std::size_t d = current.cols;
  const auto grad_row = [&](std::size_t r) -> Vec& {
    auto it = grads.find(r);
    if (it == grads.end()) it = grads.emplace(r, Vec(d, 0.0)).first;
    return it->second;
  };

  for (std::size_t i = 0; i < batch.attract.size(); ++i) {
    const auto [a, b] = batch.attract[i];
    const auto [ta, tb] = batch.attract_neg[i];
    const double pair_dot = dot(current.row(a), current.row(b));
    if (cfg.attract_margin + dot(current.row(a), current.row(ta)) - pair_dot > 0.0) {
      axpy(1.0, current.row(ta), grad_row(a));
      axpy(-1.0, current.row(b), grad_row(a));
      axpy(1.0, current.row(a), grad_row(ta));
      axpy(-1.0, current.row(a), grad_row(b));
    }
    if (cfg.attract_margin + dot(current.row(b), current.row(tb)) - pair_dot > 0.0) {
      axpy(1.0, current.row(tb), grad_row(b));
      axpy(-1.0, current.row(a), grad_row(b));
      axpy(1.0, current.row(b), grad_row(tb));
      axpy(-1.0, current.row(b), grad_row(a));
    }
  }
  for (std::size_t i = 0; i < batch.repel.size(); ++i) {
    const auto [a, b] = batch.repel[i];
    const auto [ta, tb] = batch.repel_neg[i];
    const double pair_dot = dot(current.row(a), current.row(b));
    if (cfg.repel_margin + pair_dot - dot(current.row(a), current.row(ta)) > 0.0) {
      axpy(1.0, current.row(b), grad_row(a));
      axpy(-1.0, current.row(ta), grad_row(a));
      axpy(1.0, current.row(a), grad_row(b));
      axpy(-1.0, current.row(a), grad_row(ta));
    }
    if (cfg.repel_margin + pair_dot - dot(current.row(b), current.row(tb)) > 0.0) {
      axpy(1.0, current.row(a), grad_row(b));
      axpy(-1.0, current.row(tb), grad_row(b));
      axpy(1.0, current.row(b), grad_row(a));
      axpy(-1.0, current.row(b), grad_row(tb));
    }
  }
  for (std::size_t r : batch_rows(batch)) {
    Vec& g = grad_row(r);
    for (std::size_t j = 0; j < d; ++j)
      g[j] += 2.0 * cfg.reg_lambda * (current[r][j] - initial[r][j]);
  }
}

namespace {

// Pairs resolve through whole-surface lookup only; phrases and OOV words are
// skipped (a single vector pair is what the hinge updates move).
IndexPairList resolve_pairs(const ConstraintSet& set, const EmbeddingSpace& space,
                            std::size_t* skipped) {
  IndexPairList out;
  for (const auto& p : set.pairs) {
    const auto ra = space.find(p.a.surface);
    const auto rb = space.find(p.b.surface);
    if (ra && rb && *ra != *rb) out.emplace_back(*ra, *rb);
    else if (skipped) ++(*skipped);
  }
  return out;
}

}  // namespace

EmbeddingSpace specialise(const EmbeddingSpace& space,
                          const ConstraintSet& attract,
                          const ConstraintSet& repel, const ArConfig& cfg,
                          ArTrainStats* stats, const std::string& log_csv_path) {
  ArTrainStats local;
  const IndexPairList attract_pairs =
      resolve_pairs(attract, space, &local.pairs_skipped);
  const IndexPairList repel_pairs =
      resolve_pairs(repel, space, &local.pairs_skipped);
  local.attract_pairs = attract_pairs.size();
  local.repel_pairs = repel_pairs.size();
  if (attract_pairs.empty() && repel_pairs.empty())
    throw std::runtime_error("no resolvable constraint pairs to specialise on");

  std::set<std::size_t> pool_set;
  for (const auto& [a, b] : attract_pairs) {
    pool_set.insert(a);
    pool_set.insert(b);
  }
  for (const auto& [a, b] : repel_pairs) {
    pool_set.insert(a);
    pool_set.insert(b);
  }
  const std::vector<std::size_t> pool(pool_set.begin(), pool_set.end());

  const std::size_t n = space.size();
  const std::size_t d = space.dim;
  Mat current(n, d);
  current.a = space.data;
  Mat initial = current;

  std::map<std::size_t, Vec> adagrad;  // touched rows only
  Rng rng(cfg.seed);

  std::vector<std::size_t> a_order(attract_pairs.size());
  for (std::size_t i = 0; i < a_order.size(); ++i) a_order[i] = i;
  std::vector<std::size_t> r_order(repel_pairs.size());
  for (std::size_t i = 0; i < r_order.size(); ++i) r_order[i] = i;

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t a_batches = (attract_pairs.size() + bs - 1) / bs;
  const std::size_t r_batches = (repel_pairs.size() + bs - 1) / bs;
  const std::size_t steps = std::max(a_batches, r_batches);

  std::map<std::size_t, Vec> grads;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(a_order);
    rng.shuffle(r_order);
    ArLossParts epoch_parts;

    for (std::size_t t = 0; t < steps; ++t) {
      ArBatch batch;
      if (t < a_batches) {
        const std::size_t lo = t * bs;
        const std::size_t hi = std::min(attract_pairs.size(), lo + bs);
        for (std::size_t i = lo; i < hi; ++i)
          batch.attract.push_back(attract_pairs[a_order[i]]);
        batch.attract_neg =
            select_negatives(batch.attract, current, Relation::Attract, pool, rng);
      }
      if (t < r_batches) {
        const std::size_t lo = t * bs;
        const std::size_t hi = std::min(repel_pairs.size(), lo + bs);
        for (std::size_t i = lo; i < hi; ++i)
          batch.repel.push_back(repel_pairs[r_order[i]]);
        batch.repel_neg =
            select_negatives(batch.repel, current, Relation::Repel, pool, rng);
      }

      const ArLossParts parts = ar_loss(batch, current, initial, cfg);
      epoch_parts.attract += parts.attract;
      epoch_parts.repel += parts.repel;
      epoch_parts.regularize += parts.regularize;
      epoch_parts.total += parts.total;

      grads.clear();
      ar_loss_grads(batch, current, initial, cfg, grads);
      // synchronous step: all gradients were taken at batch-start values
      for (const auto& [r, g] : grads) {
        auto it = adagrad.find(r);
        if (it == adagrad.end()) it = adagrad.emplace(r, Vec(d, 0.0)).first;
        Vec& acc = it->second;
        double* row = current[r];
        for (std::size_t j = 0; j < d; ++j) {
          acc[j] += g[j] * g[j];
          row[j] -= cfg.learning_rate * g[j] / (std::sqrt(acc[j]) + 1e-8);
        }
      }
    }
    local.epoch_losses.push_back(epoch_parts);
  }

  if (!log_csv_path.empty()) {
    std::ofstream log(log_csv_path, std::ios::binary);
    if (!log) throw std::runtime_error("cannot open log: " + log_csv_path);
    log << "epoch,attract,repel,regularize,total\n";
    for (std::size_t e = 0; e < local.epoch_losses.size(); ++e) {
      const auto& p = local.epoch_losses[e];
      log << e << ',' << format_double(p.attract) << ','
          << format_double(p.repel) << ',' << format_double(p.regularize) << ','
          << format_double(p.total) << '\n';
    }
  }

  EmbeddingSpace out = space;
  out.data = std::move(current.a);
  if (stats) *stats = local;
  return out;
}

}  // namespace sexwes
