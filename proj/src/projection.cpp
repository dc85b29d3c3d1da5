#include "sexwes/projection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sexwes {

namespace {

// Unit-normalizes v in place; returns false when it is a zero vector.
bool normalize(Vec& v) {
  const double n = norm(v);
  if (n == 0.0) return false;
  scale_inplace(v, 1.0 / n);
  return true;
}

// Mean cosine of q against its k nearest rows of a row-major unit table.
double mean_topk_cos(std::span<const double> q, const Vec& table,
                     std::size_t rows, std::size_t dim, int k) {
  std::vector<double> best;
  best.reserve(rows);
  const double qn = norm(q);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::span<const double> row{table.data() + r * dim, dim};
    best.push_back(dot(q, row) / qn);
  }
  const std::size_t kk = std::min<std::size_t>(k, best.size());
  std::partial_sort(best.begin(), best.begin() + kk, best.end(),
                    std::greater<double>());
  double s = 0.0;
  for (std::size_t i = 0; i < kk; ++i) s += best[i];
  return s / static_cast<double>(kk);
}

// Gradient of cos(u, y) with respect to u, for arbitrary-norm u and unit y.
void add_cos_grad_u(double coeff, std::span<const double> u,
                    std::span<const double> y, Vec& grad_u) {
  const double nu = norm(u);
  const double ny = norm(y);
  const double c = dot(u, y) / (nu * ny);
  for (std::size_t i = 0; i < u.size(); ++i)
    grad_u[i] += coeff * (y[i] / (nu * ny) - c * u[i] / (nu * nu));
}

struct IndexPair {
  std::size_t src_row;
  std::size_t tgt_row;
};

}  // namespace

void save_projection(const ProjectionMatrix& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << p.w.rows << ' ' << p.w.cols << '\n';
  for (std::size_t r = 0; r < p.w.rows; ++r) {
    for (std::size_t c = 0; c < p.w.cols; ++c) {
      if (c) out << ' ';
      out << format_double(p.w[r][c]);
    }
    out << '\n';
  }
}

ProjectionMatrix load_projection(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open projection file: " + path);
  std::size_t rows = 0, cols = 0;
  in >> rows >> cols;
  if (!in || rows == 0 || cols == 0)
    throw std::runtime_error("malformed projection header in " + path);
  ProjectionMatrix p;
  p.w = Mat(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (!(in >> p.w[r][c]))
        throw std::runtime_error("truncated projection matrix in " + path);
  return p;
}

std::vector<std::pair<std::string, std::string>> load_seed_dictionary(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open seed dictionary: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected \"src_word<TAB>tgt_word\"");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

ProjectionMatrix train_rcsls(
    const EmbeddingSpace& src, const EmbeddingSpace& tgt,
    const std::vector<std::pair<std::string, std::string>>& seed_dict,
    const ProjectionConfig& cfg, RcslsTrainStats* stats) {
  if (src.dim != tgt.dim)
    throw std::runtime_error("source and target dimensions differ");
  const std::size_t d = src.dim;
  const int k = cfg.k_neighbors;

  std::vector<IndexPair> pairs;
  std::size_t skipped = 0;
  for (const auto& [sw, tw] : seed_dict) {
    const auto sr = src.find(sw);
    const auto tr = tgt.find(tw);
    if (sr && tr) pairs.push_back({*sr, *tr});
    else ++skipped;
  }
  if (pairs.size() < 2)
    throw std::runtime_error("seed dictionary resolves fewer than 2 pairs");

  // Orthogonal Procrustes initialization: polar factor of sum(y x^T). A
  // dictionary with fewer pairs than dimensions leaves the cross-covariance
  // rank-deficient; blend in a small identity ridge until the factor exists.
  Mat a(d, d);
  for (const auto& p : pairs)
    add_outer(a, 1.0, tgt.row(p.tgt_row), src.row(p.src_row));
  Mat w;
  double fro = 0.0;
  for (double v : a.a) fro += v * v;
  const double ridge_unit = std::sqrt(fro) / static_cast<double>(d) + 1e-12;
  double ridge = 0.0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    Mat blended = a;
    for (std::size_t i = 0; i < d; ++i) blended[i][i] += ridge * ridge_unit;
    try {
      w = orthogonal_polar_factor(blended);
      break;
    } catch (const std::runtime_error&) {
      ridge = ridge == 0.0 ? 1e-6 : ridge * 100.0;
      if (attempt == 9) throw;
    }
  }

  const std::size_t nsrc = src.size();
  const std::size_t ntgt = tgt.size();
  const double inv_n = 1.0 / static_cast<double>(pairs.size());

  // Projects the full source vocabulary under the current W.
  const auto project_vocab = [&](const Mat& wm) {
    Vec proj(nsrc * d, 0.0);
    for (std::size_t r = 0; r < nsrc; ++r) {
      const Vec u = matvec(wm, src.row(r));
      std::copy(u.begin(), u.end(), proj.begin() + r * d);
    }
    return proj;
  };

  struct Neighborhoods {
    // per pair: k nearest target rows of Wx, k nearest projected source rows of y
    std::vector<std::vector<std::size_t>> tgt_nn, src_nn;
  };

  const auto top_k_rows = [&](std::span<const double> q, const Vec& table,
                              std::size_t rows) {
    Vec scores(rows, 0.0);
    const double qn = norm(q);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::span<const double> row{table.data() + r * d, d};
      scores[r] = dot(q, row) / (qn * norm(row));
    }
    auto ranked = rank_scores(scores, std::min<std::size_t>(k, rows));
    std::vector<std::size_t> idx(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) idx[i] = ranked[i].row;
    return idx;
  };

  // Objective and neighborhood computation for a candidate W.
  const auto evaluate = [&](const Mat& wm, Neighborhoods* nbhd) {
    const Vec proj = project_vocab(wm);
    double obj = 0.0;
    if (nbhd) {
      nbhd->tgt_nn.assign(pairs.size(), {});
      nbhd->src_nn.assign(pairs.size(), {});
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::span<const double> u{proj.data() + pairs[i].src_row * d, d};
      const auto y = tgt.row(pairs[i].tgt_row);
      const double cos_uy = dot(u, y) / (norm(u) * norm(y));

      const auto tnn = top_k_rows(u, tgt.data, ntgt);
      const auto snn = top_k_rows(y, proj, nsrc);
      double mean_t = 0.0;
      for (auto r : tnn)
        mean_t += dot(u, tgt.row(r)) / (norm(u) * norm(tgt.row(r)));
      mean_t /= static_cast<double>(tnn.size());
      double mean_s = 0.0;
      for (auto r : snn) {
        const std::span<const double> uj{proj.data() + r * d, d};
        mean_s += dot(uj, y) / (norm(uj) * norm(y));
      }
      mean_s /= static_cast<double>(snn.size());

      obj += csls_score(cos_uy, mean_t, mean_s);
      if (nbhd) {
        nbhd->tgt_nn[i] = tnn;
        nbhd->src_nn[i] = snn;
      }
    }
    return obj * inv_n;
  };

  RcslsTrainStats local;
  local.pairs_resolved = pairs.size();
  local.pairs_skipped = skipped;

  Mat best_w = w;
  Neighborhoods nbhd;
  double best_obj = evaluate(w, &nbhd);
  local.objective_per_iteration.push_back(best_obj);

  double lr = cfg.learning_rate;
  for (int it = 0; it < cfg.iterations; ++it) {
    // Gradient with the current neighborhoods held fixed.
    const Vec proj = project_vocab(w);
    Mat grad(d, d);
    Vec grad_u(d, 0.0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto x = src.row(pairs[i].src_row);
      const auto y = tgt.row(pairs[i].tgt_row);
      const std::span<const double> u{proj.data() + pairs[i].src_row * d, d};

      std::fill(grad_u.begin(), grad_u.end(), 0.0);
      add_cos_grad_u(2.0, u, y, grad_u);
      for (auto r : nbhd.tgt_nn[i])
        add_cos_grad_u(-1.0 / k, u, tgt.row(r), grad_u);
      add_outer(grad, inv_n, grad_u, x);

      for (auto r : nbhd.src_nn[i]) {
        const std::span<const double> uj{proj.data() + r * d, d};
        std::fill(grad_u.begin(), grad_u.end(), 0.0);
        add_cos_grad_u(-1.0 / k, uj, y, grad_u);
        add_outer(grad, inv_n, grad_u, src.row(r));
      }
    }

    Mat cand = w;
    for (std::size_t i = 0; i < cand.a.size(); ++i)
      cand.a[i] += lr * grad.a[i];
    if (!all_finite(cand.a))
      throw std::runtime_error("rcsls: non-finite update, lower learning_rate");

    Neighborhoods cand_nbhd;
    const double cand_obj = evaluate(cand, &cand_nbhd);
    local.objective_per_iteration.push_back(cand_obj);
    if (cand_obj >= best_obj) {
      best_obj = cand_obj;
      best_w = cand;
      w = std::move(cand);
      nbhd = std::move(cand_nbhd);
    } else {
      // step overshot: keep the best W and retry more conservatively
      lr *= 0.5;
      w = best_w;
      evaluate(w, &nbhd);
    }
  }

  local.best_objective = best_obj;
  if (stats) *stats = local;
  return ProjectionMatrix{std::move(best_w)};
}

CslsContext CslsContext::build(const EmbeddingSpace& src,
                               const EmbeddingSpace& tgt,
                               const ProjectionMatrix& w, int k_neighbors) {
  if (w.src_dim() != src.dim || w.tgt_dim() != tgt.dim)
    throw std::runtime_error("projection shape does not match the spaces");
  CslsContext ctx;
  ctx.tgt = &tgt;
  ctx.k = k_neighbors;
  const std::size_t d = tgt.dim;

  ctx.tgt_unit.assign(tgt.size() * d, 0.0);
  for (std::size_t r = 0; r < tgt.size(); ++r) {
    Vec row(tgt.row(r).begin(), tgt.row(r).end());
    if (!normalize(row))
      throw std::runtime_error("zero target row for \"" + tgt.words[r] + "\"");
    std::copy(row.begin(), row.end(), ctx.tgt_unit.begin() + r * d);
  }

  Vec proj_unit(src.size() * d, 0.0);
  for (std::size_t r = 0; r < src.size(); ++r) {
    Vec u = matvec(w.w, src.row(r));
    if (!normalize(u)) continue;  // degenerate projection of a source row
    std::copy(u.begin(), u.end(), proj_unit.begin() + r * d);
  }

  ctx.tgt_penalty.assign(tgt.size(), 0.0);
  for (std::size_t r = 0; r < tgt.size(); ++r) {
    const std::span<const double> y{ctx.tgt_unit.data() + r * d, d};
    ctx.tgt_penalty[r] = mean_topk_cos(y, proj_unit, src.size(), d, k_neighbors);
  }
  return ctx;
}

Vec CslsContext::score_all(std::span<const double> projected_query) const {
  const std::size_t d = tgt->dim;
  Vec q(projected_query.begin(), projected_query.end());
  if (!normalize(q)) throw std::runtime_error("zero projected query");
  const double query_penalty =
      mean_topk_cos(q, tgt_unit, tgt->size(), d, k);
  Vec scores(tgt->size(), 0.0);
  for (std::size_t r = 0; r < tgt->size(); ++r) {
    const std::span<const double> y{tgt_unit.data() + r * d, d};
    scores[r] = csls_score(dot(q, y), query_penalty, tgt_penalty[r]);
  }
  return scores;
}

std::optional<Translation> translate_term(const TaggedTerm& term,
                                          const ProjectionMatrix& w,
                                          const EmbeddingSpace& src,
                                          const EmbeddingSpace& tgt,
                                          const ProjectionConfig& cfg,
                                          const CslsContext* ctx) {
  Vec x;
  if (auto r = src.find(term.surface)) {
    x.assign(src.row(*r).begin(), src.row(*r).end());
  } else {
    const auto toks = term.tokens();
    bool any = false;
    for (const auto& t : toks) any = any || src.contains(t);
    if (!any) return std::nullopt;
    x = phrase_vector(src, toks);
  }

  Vec u = matvec(w.w, x);
  if (norm(u) == 0.0) return std::nullopt;

  if (cfg.csls_retrieval && ctx) {
    const Vec scores = ctx->score_all(u);
    const auto top = rank_scores(scores, 1);
    return Translation{tgt.words[top[0].row], top[0].score};
  }
  const auto top = nearest_neighbors(tgt, u, 1);
  return Translation{tgt.words[top[0].row], top[0].score};
}

ConstraintSet project_constraints(const ConstraintSet& c_src,
                                  const ProjectionMatrix& w,
                                  const EmbeddingSpace& src,
                                  const EmbeddingSpace& tgt,
                                  const ProjectionConfig& cfg,
                                  bool phrase_level, const LangConfig& langs,
                                  ProjectStats* stats) {
  if (c_src.group == Group::CrossLingual)
    throw std::runtime_error("project_constraints expects a monolingual set");

  CslsContext ctx;
  const CslsContext* ctx_ptr = nullptr;
  if (cfg.csls_retrieval) {
    ctx = CslsContext::build(src, tgt, w, cfg.k_neighbors);
    ctx_ptr = &ctx;
  }

  ConstraintSet out;
  out.relation = c_src.relation;
  out.group = c_src.group;
  ProjectStats local;

  for (const auto& p : c_src.pairs) {
    if (!phrase_level && (p.a.is_phrase() || p.b.is_phrase())) {
      ++local.dropped_phrase;
      continue;
    }
    const auto ta = translate_term(p.a, w, src, tgt, cfg, ctx_ptr);
    const auto tb = translate_term(p.b, w, src, tgt, cfg, ctx_ptr);
    if (!ta || !tb) {
      ++local.dropped_unresolvable;
      continue;
    }
    if (ta->word == tb->word) {
      ++local.dropped_self;
      continue;
    }
    if (!out.insert(TermPair({langs.target, ta->word}, {langs.target, tb->word})))
      ++local.duplicates_merged;
  }

  if (stats) *stats = local;
  return out;
}

}  // namespace sexwes
