#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "sexwes/attract_repel.hpp"
#include "test_util.hpp"

using namespace sexwes;

namespace {

Mat mat_of(const EmbeddingSpace& s) {
  Mat m(s.size(), s.dim);
  m.a = s.data;
  return m;
}

// Independent reimplementation of the batch loss, plain and literal.
double oracle_ar_loss(const ArBatch& batch, const Mat& cur, const Mat& init,
                      const ArConfig& cfg) {
  auto dotrows = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < cur.cols; ++c) s += cur[i][c] * cur[j][c];
    return s;
  };
  auto T = [](double x) { return x > 0.0 ? x : 0.0; };

  double total = 0.0;
  for (std::size_t i = 0; i < batch.attract.size(); ++i) {
    const auto [a, b] = batch.attract[i];
    const auto [ta, tb] = batch.attract_neg[i];
    total += T(cfg.attract_margin + dotrows(a, ta) - dotrows(a, b));
    total += T(cfg.attract_margin + dotrows(b, tb) - dotrows(a, b));
  }
  for (std::size_t i = 0; i < batch.repel.size(); ++i) {
    const auto [a, b] = batch.repel[i];
    const auto [ta, tb] = batch.repel_neg[i];
    total += T(cfg.repel_margin + dotrows(a, b) - dotrows(a, ta));
    total += T(cfg.repel_margin + dotrows(a, b) - dotrows(b, tb));
  }
  std::set<std::size_t> rows;
  for (const auto& list : {batch.attract, batch.repel, batch.attract_neg,
                           batch.repel_neg})
    for (const auto& [x, y] : list) {
      rows.insert(x);
      rows.insert(y);
    }
  for (std::size_t r : rows) {
    double sq = 0.0;
    for (std::size_t c = 0; c < cur.cols; ++c) {
      const double dd = init[r][c] - cur[r][c];
      sq += dd * dd;
    }
    total += cfg.reg_lambda * sq;
  }
  return total;
}

ArBatch random_batch(const EmbeddingSpace& space, std::size_t n_att,
                     std::size_t n_rep, std::uint64_t seed) {
  Rng rng(seed);
  ArBatch batch;
  auto draw_pair = [&]() {
    std::size_t a = rng.index(space.size());
    std::size_t b = rng.index(space.size());
    while (b == a) b = rng.index(space.size());
    return std::make_pair(a, b);
  };
  for (std::size_t i = 0; i < n_att; ++i) {
    batch.attract.push_back(draw_pair());
    batch.attract_neg.push_back(draw_pair());
  }
  for (std::size_t i = 0; i < n_rep; ++i) {
    batch.repel.push_back(draw_pair());
    batch.repel_neg.push_back(draw_pair());
  }
  return batch;
}

ConstraintSet set_of(const EmbeddingSpace& space, const IndexPairList& pairs,
                     Relation rel) {
  ConstraintSet s;
  s.relation = rel;
  s.group = Group::Domain;
  for (const auto& [a, b] : pairs)
    s.insert(TermPair({"zh", space.words[a]}, {"zh", space.words[b]}));
  return s;
}

double mean_pair_cosine(const EmbeddingSpace& space, const ConstraintSet& set) {
  double s = 0.0;
  for (const auto& p : set.pairs) s += cosine(space, p.a.surface, p.b.surface);
  return s / static_cast<double>(set.size());
}

// 50-word toy fixture with 10 attract and 5 repel pairs.
struct ToyFixture {
  EmbeddingSpace space;
  ConstraintSet attract, repel;
};

ToyFixture toy_fixture(std::uint64_t seed) {
  ToyFixture f;
  f.space = testutil::random_space(50, 10, seed);
  IndexPairList att, rep;
  for (std::size_t i = 0; i < 20; i += 2) att.emplace_back(i, i + 1);
  for (std::size_t i = 20; i < 30; i += 2) rep.emplace_back(i, i + 1);
  f.attract = set_of(f.space, att, Relation::Attract);
  f.repel = set_of(f.space, rep, Relation::Repel);
  return f;
}

}  // namespace

TEST_CASE("published default configuration is echoed") {
  ArConfig cfg;
  CHECK(cfg.attract_margin == 0.6);
  CHECK(cfg.repel_margin == 0.0);
  CHECK(cfg.reg_lambda == 1e-9);
  CHECK(cfg.learning_rate == 0.05);
  CHECK(cfg.batch_size == 50);
  CHECK(cfg.epochs == 5);
}

TEST_CASE("ar_loss: attract anchors from direct formula evaluation") {
  // rows: 0,1 identical unit vectors; 2,3 orthogonal to them
  EmbeddingSpace s;
  s.dim = 2;
  s.add("a", Vec{1, 0});
  s.add("b", Vec{1, 0});
  s.add("t1", Vec{0, 1});
  s.add("t2", Vec{0, 1});
  Mat m = mat_of(s);
  ArConfig cfg;
  cfg.reg_lambda = 0.0;

  ArBatch identical;
  identical.attract = {{0, 1}};
  identical.attract_neg = {{2, 3}};
  const auto parts0 = ar_loss(identical, m, m, cfg);
  CHECK(parts0.attract == doctest::Approx(0.0));
  CHECK(parts0.total == doctest::Approx(0.0));

  // orthogonal pair, negatives identical to the anchors: 2 * (0.6 + 1 - 0)
  ArBatch ortho;
  ortho.attract = {{0, 2}};
  ortho.attract_neg = {{1, 3}};
  const auto parts1 = ar_loss(ortho, m, m, cfg);
  CHECK(parts1.attract == doctest::Approx(3.2));
}

TEST_CASE("ar_loss: repel hinge pushes pairs below their negatives") {
  EmbeddingSpace s;
  s.dim = 2;
  s.add("a", Vec{1, 0});
  s.add("b", Vec{1, 0});
  s.add("t", Vec{0, 1});
  s.add("t2", Vec{0, 1});
  Mat m = mat_of(s);
  ArConfig cfg;
  cfg.reg_lambda = 0.0;

  // identical repel pair with orthogonal negatives: 2 * (0.0 + 1 - 0) = 2
  ArBatch batch;
  batch.repel = {{0, 1}};
  batch.repel_neg = {{2, 3}};
  const auto parts = ar_loss(batch, m, m, cfg);
  CHECK(parts.repel == doctest::Approx(2.0));

  // already-orthogonal repel pair with identical-direction negatives is flat
  ArBatch flat;
  flat.repel = {{0, 2}};
  flat.repel_neg = {{1, 3}};
  CHECK(ar_loss(flat, m, m, cfg).repel == doctest::Approx(0.0));
}

TEST_CASE("ar_loss: regularizer measures squared drift of batch words") {
  EmbeddingSpace s;
  s.dim = 2;
  s.add("a", Vec{1, 0});
  s.add("b", Vec{0, 1});
  Mat init = mat_of(s);
  Mat cur = init;
  cur[0][0] = 0.5;  // drift of 0.5 on one coordinate
  ArConfig cfg;
  cfg.attract_margin = 0.0;
  cfg.reg_lambda = 2.0;

  ArBatch batch;
  batch.attract = {{0, 1}};
  batch.attract_neg = {{1, 0}};  // degenerate but exercises rows only
  const auto parts = ar_loss(batch, cur, init, cfg);
  CHECK(parts.regularize == doctest::Approx(2.0 * 0.25));
}

TEST_CASE("ar_loss matches the independent oracle on random batches") {
  const auto space = testutil::random_space(30, 8, 3);
  const Mat init = mat_of(space);
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    Mat cur = init;
    for (auto& v : cur.a) v += 0.1 * rng.normal();
    const auto batch = random_batch(space, 8, 8, 1000 + trial);
    ArConfig cfg;
    cfg.reg_lambda = 1e-3;
    const auto parts = ar_loss(batch, cur, init, cfg);
    CHECK(parts.total == doctest::Approx(oracle_ar_loss(batch, cur, init, cfg))
                             .epsilon(1e-12));
    CHECK(parts.total ==
          doctest::Approx(parts.attract + parts.repel + parts.regularize));
  }
}

TEST_CASE("ar_loss gradients match central finite differences") {
  const auto space = testutil::random_space(16, 6, 5);
  const Mat init = mat_of(space);
  Mat cur = init;
  Rng rng(7);
  for (auto& v : cur.a) v += 0.05 * rng.normal();

  const auto batch = random_batch(space, 5, 4, 99);
  ArConfig cfg;
  cfg.reg_lambda = 0.01;

  // keep every hinge comfortably away from its kink
  {
    std::map<std::size_t, Vec> dummy;
    const auto parts = ar_loss(batch, cur, init, cfg);
    (void)parts;
  }

  std::map<std::size_t, Vec> grads;
  ar_loss_grads(batch, cur, init, cfg, grads);

  const double h = 1e-6;
  double worst = 0.0;
  for (const auto& [r, g] : grads) {
    for (std::size_t j = 0; j < cur.cols; ++j) {
      Mat pert = cur;
      pert[r][j] += h;
      const double lp = ar_loss(batch, pert, init, cfg).total;
      pert[r][j] = cur[r][j] - h;
      const double lm = ar_loss(batch, pert, init, cfg).total;
      const double fd = (lp - lm) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(g[j]), 1e-6});
      worst = std::max(worst, std::abs(fd - g[j]) / denom);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("select_negatives: batch of two pairs draws from the other pair") {
  const auto space = testutil::random_space(10, 6, 23);
  const Mat m = mat_of(space);
  IndexPairList batch = {{0, 1}, {2, 3}};
  Rng rng(5);
  const auto neg = select_negatives(batch, m, Relation::Attract, {}, rng);
  REQUIRE(neg.size() == 2);
  CHECK((neg[0].first == 2 || neg[0].first == 3));
  CHECK((neg[0].second == 2 || neg[0].second == 3));
  CHECK((neg[1].first == 0 || neg[1].first == 1));
  CHECK((neg[1].second == 0 || neg[1].second == 1));
}

TEST_CASE("select_negatives: similarity choice prefers the near-duplicate") {
  // pair (0,1); candidates: row 2 duplicates row 0's direction, row 3 is
  // orthogonal to everything. The nearest-negative scan must take row 2
  // for t_a, never the orthogonal row.
  EmbeddingSpace s;
  s.dim = 4;
  s.add("a", Vec{1, 0, 0, 0});
  s.add("b", Vec{0.6, 0.8, 0, 0});
  s.add("dup", Vec{0.999, 0.0447, 0, 0});
  s.add("orth", Vec{0, 0, 1, 0});
  const Mat m = mat_of(s);
  IndexPairList batch = {{0, 1}, {2, 3}};

  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    Rng rng(seed);
    std::vector<bool> sim;
    const auto neg = select_negatives(batch, m, Relation::Attract, {}, rng, &sim);
    if (sim[0]) CHECK(neg[0].first == 2);
    // repel flips the scan to farthest
    Rng rng2(seed);
    std::vector<bool> sim2;
    const auto negr = select_negatives(batch, m, Relation::Repel, {}, rng2, &sim2);
    if (sim2[0]) CHECK(negr[0].first == 3);
  }
}

TEST_CASE("select_negatives: deterministic given a seed; fallback pool works") {
  const auto space = testutil::random_space(12, 5, 31);
  const Mat m = mat_of(space);
  IndexPairList batch = {{0, 1}, {2, 3}, {4, 5}};
  Rng r1(77), r2(77);
  const auto n1 = select_negatives(batch, m, Relation::Attract, {}, r1);
  const auto n2 = select_negatives(batch, m, Relation::Attract, {}, r2);
  CHECK(n1 == n2);

  // single-pair batch: no in-batch candidates, draws from the pool
  IndexPairList solo = {{0, 1}};
  std::vector<std::size_t> pool = {5, 6, 7};
  Rng r3(9);
  const auto n3 = select_negatives(solo, m, Relation::Attract, pool, r3);
  CHECK(n3[0].first >= 5);
  CHECK(n3[0].first <= 7);

  Rng r4(9);
  CHECK_THROWS_AS(select_negatives(solo, m, Relation::Attract, {}, r4),
                  std::runtime_error);

  // negatives never hit the pair's own members
  for (int t = 0; t < 50; ++t) {
    Rng rr(t);
    const auto neg = select_negatives(batch, m, Relation::Attract, {}, rr);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(neg[i].first != batch[i].first);
      CHECK(neg[i].first != batch[i].second);
      CHECK(neg[i].second != batch[i].first);
      CHECK(neg[i].second != batch[i].second);
    }
  }
}

TEST_CASE("specialise: attract cosines rise, repel cosines fall, rest frozen") {
  auto f = toy_fixture(2025);
  const double att_before = mean_pair_cosine(f.space, f.attract);
  const double rep_before = mean_pair_cosine(f.space, f.repel);

  ArConfig cfg;
  ArTrainStats stats;
  const auto out = specialise(f.space, f.attract, f.repel, cfg, &stats);
  CHECK(stats.attract_pairs == 10);
  CHECK(stats.repel_pairs == 5);

  const double att_after = mean_pair_cosine(out, f.attract);
  const double rep_after = mean_pair_cosine(out, f.repel);
  CHECK(att_after > att_before);
  CHECK(rep_after < rep_before);

  // constrained rows are 0..29; everything else must be bit-identical
  for (std::size_t r = 30; r < f.space.size(); ++r)
    for (std::size_t j = 0; j < f.space.dim; ++j)
      CHECK(out.row(r)[j] == f.space.row(r)[j]);
}

TEST_CASE("specialise: empty repel set is legal") {
  auto f = toy_fixture(31);
  ConstraintSet empty_repel;
  empty_repel.relation = Relation::Repel;
  empty_repel.group = Group::Domain;
  const double before = mean_pair_cosine(f.space, f.attract);
  const auto out = specialise(f.space, f.attract, empty_repel, ArConfig{});
  CHECK(mean_pair_cosine(out, f.attract) > before);

  ConstraintSet empty_attract;
  empty_attract.relation = Relation::Attract;
  empty_attract.group = Group::Domain;
  CHECK_THROWS_AS(specialise(f.space, empty_attract, empty_repel, ArConfig{}),
                  std::runtime_error);
}

TEST_CASE("specialise: unresolvable and phrase pairs are skipped with a count") {
  auto f = toy_fixture(41);
  f.attract.insert(TermPair({"zh", "ghost"}, {"zh", f.space.words[0]}));
  f.attract.insert(TermPair({"zh", f.space.words[0] + " " + f.space.words[2]},
                            {"zh", f.space.words[4]}));
  ArTrainStats stats;
  (void)specialise(f.space, f.attract, f.repel, ArConfig{}, &stats);
  CHECK(stats.pairs_skipped == 2);
  CHECK(stats.attract_pairs == 10);
}

TEST_CASE("specialise: huge regularizer keeps vectors at their start") {
  ToyFixture f;
  f.space = testutil::random_space(50, 20, 57);
  IndexPairList att, rep;
  for (std::size_t i = 0; i < 20; i += 2) att.emplace_back(i, i + 1);
  for (std::size_t i = 20; i < 30; i += 2) rep.emplace_back(i, i + 1);
  f.attract = set_of(f.space, att, Relation::Attract);
  f.repel = set_of(f.space, rep, Relation::Repel);

  ArConfig cfg;
  cfg.reg_lambda = 1e3;
  const auto out = specialise(f.space, f.attract, f.repel, cfg);
  double worst = 0.0;
  for (std::size_t r = 0; r < f.space.size(); ++r)
    for (std::size_t j = 0; j < f.space.dim; ++j)
      worst = std::max(worst, std::abs(out.row(r)[j] - f.space.row(r)[j]));
  CHECK(worst <= 1e-3);
}

TEST_CASE("specialise: first epoch reduces the fixed-batch total loss") {
  auto f = toy_fixture(71);
  ArConfig cfg;
  cfg.epochs = 1;
  const auto after = specialise(f.space, f.attract, f.repel, cfg);

  // one fixed evaluation batch over every pair, negatives from a fixed seed
  const Mat init = mat_of(f.space);
  const Mat post = mat_of(after);

  ArBatch eval;
  for (const auto& p : f.attract.pairs)
    eval.attract.emplace_back(*f.space.find(p.a.surface),
                              *f.space.find(p.b.surface));
  for (const auto& p : f.repel.pairs)
    eval.repel.emplace_back(*f.space.find(p.a.surface),
                            *f.space.find(p.b.surface));
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < 30; ++i) pool.push_back(i);
  Rng rng(123);
  eval.attract_neg =
      select_negatives(eval.attract, init, Relation::Attract, pool, rng);
  eval.repel_neg = select_negatives(eval.repel, init, Relation::Repel, pool, rng);

  const double before_loss = ar_loss(eval, init, init, cfg).total;
  const double after_loss = ar_loss(eval, post, init, cfg).total;
  CHECK(after_loss <= before_loss);
}

TEST_CASE("specialise is deterministic given one seed") {
  auto f = toy_fixture(83);
  const auto o1 = specialise(f.space, f.attract, f.repel, ArConfig{});
  const auto o2 = specialise(f.space, f.attract, f.repel, ArConfig{});
  CHECK(o1.data == o2.data);
}
