#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sexwes/constraints.hpp"
#include "sexwes/rng.hpp"
#include "test_util.hpp"

using namespace sexwes;
using testutil::temp_dir;
using testutil::write_file;

namespace {

ConstraintSet make_set(Relation rel, Group grp,
                       std::initializer_list<std::pair<const char*, const char*>> pairs,
                       const char* lang = "zh") {
  ConstraintSet s;
  s.relation = rel;
  s.group = grp;
  for (const auto& [a, b] : pairs)
    s.insert(TermPair({lang, a}, {lang, b}));
  return s;
}

ConstraintSet random_set(Rng& rng, Relation rel, std::size_t npairs) {
  ConstraintSet s;
  s.relation = rel;
  s.group = Group::Domain;
  char wa[16], wb[16];
  for (std::size_t i = 0; i < npairs; ++i) {
    std::snprintf(wa, sizeof(wa), "w%zu", rng.index(30));
    std::snprintf(wb, sizeof(wb), "w%zu", rng.index(30));
    if (std::string(wa) == wb) continue;
    s.insert(TermPair({"zh", wa}, {"zh", wb}));
  }
  return s;
}

}  // namespace

TEST_CASE("load: empty file gives an empty set") {
  auto dir = temp_dir("con_empty");
  write_file(dir / "c.tsv", "");
  auto s = load_constraints((dir / "c.tsv").string(), Relation::Attract,
                            Group::Domain);
  CHECK(s.size() == 0);
}

TEST_CASE("load: cross-lingual attract pair") {
  auto dir = temp_dir("con_cl");
  write_file(dir / "c.tsv", "en_hate\tzh_\xe6\x86\x8e\xe6\x81\xb6\n");
  auto s = load_constraints((dir / "c.tsv").string(), Relation::Attract,
                            Group::CrossLingual);
  REQUIRE(s.size() == 1);
  const auto& p = s.pairs[0];
  CHECK(((p.a.lang == "en" && p.b.lang == "zh") ||
         (p.a.lang == "zh" && p.b.lang == "en")));
}

TEST_CASE("load: duplicate pair in both orders collapses to one") {
  auto dir = temp_dir("con_dup");
  write_file(dir / "c.tsv",
             "zh_a\tzh_b\n"
             "zh_b\tzh_a\n");
  ConstraintLoadStats stats;
  auto s = load_constraints((dir / "c.tsv").string(), Relation::Attract,
                            Group::Domain, {}, false, &stats);
  CHECK(s.size() == 1);
  CHECK(stats.duplicates_dropped == 1);
}

TEST_CASE("load: self pairs dropped with a count, comments skipped") {
  auto dir = temp_dir("con_self");
  write_file(dir / "c.tsv",
             "# header comment\n"
             "zh_x\tzh_x\n"
             "zh_x\tzh_y\n");
  ConstraintLoadStats stats;
  auto s = load_constraints((dir / "c.tsv").string(), Relation::Attract,
                            Group::Domain, {}, false, &stats);
  CHECK(s.size() == 1);
  CHECK(stats.self_pairs_dropped == 1);
  CHECK(stats.comment_lines == 1);
}

TEST_CASE("load: phrases keep spaces in the surface") {
  auto dir = temp_dir("con_phrase");
  write_file(dir / "c.tsv", "en_angelic b*tch\ten_manipulator\n");
  auto s = load_constraints((dir / "c.tsv").string(), Relation::Attract,
                            Group::Domain);
  REQUIRE(s.size() == 1);
  bool saw_phrase = s.pairs[0].a.surface == "angelic b*tch" ||
                    s.pairs[0].b.surface == "angelic b*tch";
  CHECK(saw_phrase);
}

TEST_CASE("load: malformed and inconsistent lines rejected") {
  auto dir = temp_dir("con_bad");
  write_file(dir / "notab.tsv", "zh_a zh_b\n");
  CHECK_THROWS_AS(load_constraints((dir / "notab.tsv").string(),
                                   Relation::Attract, Group::Domain),
                  std::runtime_error);

  write_file(dir / "notag.tsv", "plain\tzh_b\n");
  CHECK_THROWS_AS(load_constraints((dir / "notag.tsv").string(),
                                   Relation::Attract, Group::Domain),
                  std::runtime_error);

  write_file(dir / "mixed.tsv", "en_a\tzh_b\n");
  CHECK_THROWS_AS(load_constraints((dir / "mixed.tsv").string(),
                                   Relation::Attract, Group::Domain),
                  std::runtime_error);

  write_file(dir / "mono.tsv", "en_a\ten_b\n");
  CHECK_THROWS_AS(load_constraints((dir / "mono.tsv").string(),
                                   Relation::Attract, Group::CrossLingual),
                  std::runtime_error);

  write_file(dir / "clrep.tsv", "en_a\tzh_b\n");
  CHECK_THROWS_AS(load_constraints((dir / "clrep.tsv").string(),
                                   Relation::Repel, Group::CrossLingual),
                  std::runtime_error);
  // override flag accepts it
  auto s = load_constraints((dir / "clrep.tsv").string(), Relation::Repel,
                            Group::CrossLingual, {}, true);
  CHECK(s.size() == 1);
}

namespace {

// Bulk-builds a set of npairs pairs tagged with a distinct prefix; the first
// `shared` pairs are drawn from a common pool so two sets can overlap by an
// exact amount.
ConstraintSet bulk_set(Relation rel, Group grp, std::size_t npairs,
                       const char* prefix, std::size_t shared = 0) {
  ConstraintSet s;
  s.relation = rel;
  s.group = grp;
  s.pairs.reserve(npairs);
  char wa[24], wb[24];
  for (std::size_t i = 0; i < shared; ++i) {
    std::snprintf(wa, sizeof(wa), "s%zua", i);
    std::snprintf(wb, sizeof(wb), "s%zub", i);
    s.pairs.emplace_back(TaggedTerm{"zh", wa}, TaggedTerm{"zh", wb});
  }
  for (std::size_t i = shared; i < npairs; ++i) {
    std::snprintf(wa, sizeof(wa), "%s%zua", prefix, i);
    std::snprintf(wb, sizeof(wb), "%s%zub", prefix, i);
    s.pairs.emplace_back(TaggedTerm{"zh", wa}, TaggedTerm{"zh", wb});
  }
  std::sort(s.pairs.begin(), s.pairs.end());
  return s;
}

}  // namespace

TEST_CASE("merge: general/domain union counts at full scale") {
  // The real general and domain sets overlap: their union deduplicates
  // 640,435 + 130,445 to 768,294 attract pairs and 11,939 + 501 to 12,148
  // repel pairs. Reproduce those counts with an exact planted overlap.
  auto g_att = bulk_set(Relation::Attract, Group::General, 640435, "g", 2586);
  auto d_att = bulk_set(Relation::Attract, Group::Domain, 130445, "d", 2586);
  auto both_att = merge(std::vector<ConstraintSet>{g_att, d_att});
  CHECK(both_att.size() == 768294);
  CHECK(both_att.group == Group::Both);

  auto g_rep = bulk_set(Relation::Repel, Group::General, 11939, "G", 292);
  auto d_rep = bulk_set(Relation::Repel, Group::Domain, 501, "D", 292);
  auto both_rep = merge(std::vector<ConstraintSet>{g_rep, d_rep});
  CHECK(both_rep.size() == 12148);

  ConstraintSet g = make_set(Relation::Attract, Group::General,
                             {{"a", "b"}, {"c", "d"}, {"e", "f"}});
  ConstraintSet overlap = make_set(Relation::Attract, Group::Domain,
                                   {{"a", "b"}, {"x", "y"}});
  auto merged = merge(std::vector<ConstraintSet>{g, overlap});
  CHECK(merged.size() == 4);
}

TEST_CASE("merge: identity with the empty set and relation mismatch error") {
  ConstraintSet s = make_set(Relation::Repel, Group::Domain, {{"a", "b"}});
  ConstraintSet empty;
  empty.relation = Relation::Repel;
  empty.group = Group::Domain;
  auto m = merge(std::vector<ConstraintSet>{s, empty});
  CHECK(m.pairs == s.pairs);
  CHECK(m.group == Group::Domain);

  ConstraintSet att = make_set(Relation::Attract, Group::Domain, {{"c", "d"}});
  CHECK_THROWS_AS(merge(std::vector<ConstraintSet>{s, att}), std::runtime_error);
}

TEST_CASE("merge is commutative, associative and idempotent on random sets") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_set(rng, Relation::Attract, 12);
    auto b = random_set(rng, Relation::Attract, 12);
    auto c = random_set(rng, Relation::Attract, 12);

    auto ab = merge(std::vector<ConstraintSet>{a, b});
    auto ba = merge(std::vector<ConstraintSet>{b, a});
    CHECK(ab.pairs == ba.pairs);

    auto ab_c = merge(std::vector<ConstraintSet>{ab, c});
    auto bc = merge(std::vector<ConstraintSet>{b, c});
    auto a_bc = merge(std::vector<ConstraintSet>{a, bc});
    CHECK(ab_c.pairs == a_bc.pairs);

    auto aa = merge(std::vector<ConstraintSet>{a, a});
    CHECK(aa.pairs == a.pairs);

    const std::size_t total = a.size() + b.size();
    CHECK(ab.size() <= total);
    CHECK(ab.size() >= std::max(a.size(), b.size()));
  }
}

TEST_CASE("load twice yields identical sets") {
  auto dir = temp_dir("con_twice");
  write_file(dir / "c.tsv", "zh_m\tzh_n\nzh_o\tzh_p\nzh_m\tzh_q\n");
  auto s1 = load_constraints((dir / "c.tsv").string(), Relation::Attract,
                             Group::Domain);
  auto s2 = load_constraints((dir / "c.tsv").string(), Relation::Attract,
                             Group::Domain);
  CHECK(s1.pairs == s2.pairs);
}

TEST_CASE("coverage: full, empty and hand-counted fixtures") {
  EmbeddingSpace space;
  space.dim = 2;
  for (const char* w : {"a", "b", "c", "d", "p", "q"})
    space.add(w, Vec{1.0, 0.5});

  auto full = make_set(Relation::Attract, Group::Domain,
                       {{"a", "b"}, {"c", "d"}});
  auto rep = coverage(full, space);
  CHECK(rep.covered_pairs == full.size());
  CHECK(rep.covered_terms == 4);
  CHECK(rep.vocab_fraction == doctest::Approx(4.0 / 6.0));

  ConstraintSet empty;
  empty.group = Group::Domain;
  auto rep0 = coverage(empty, space);
  CHECK(rep0.covered_terms == 0);
  CHECK(rep0.vocab_fraction == 0.0);
  CHECK(rep0.covered_pairs == 0);

  // 10 pairs, 3 distinct OOV terms, hand-counted expectations:
  // pairs touching an OOV term are uncovered.
  auto fix = make_set(Relation::Attract, Group::Domain,
                      {{"a", "b"},
                       {"a", "c"},
                       {"b", "d"},
                       {"c", "d"},
                       {"p", "q"},
                       {"a", "oov1"},
                       {"b", "oov2"},
                       {"c", "oov3"},
                       {"oov1", "oov2"},
                       {"d", "p"}});
  REQUIRE(fix.size() == 10);
  auto repf = coverage(fix, space);
  CHECK(repf.covered_pairs == 6);
  CHECK(repf.covered_terms == 6);

  // phrase resolves through its tokens for pair coverage
  ConstraintSet ph;
  ph.relation = Relation::Attract;
  ph.group = Group::Domain;
  ph.insert(TermPair({"zh", "a b"}, {"zh", "c"}));
  auto repph = coverage(ph, space);
  CHECK(repph.covered_pairs == 1);
  CHECK(repph.covered_terms == 1);  // only "c" is a vocabulary entry
}

TEST_CASE("seen_vocabulary: definition echo and phrase exclusion") {
  EmbeddingSpace space;
  space.dim = 2;
  for (const char* w : {"a", "b", "c"}) space.add(w, Vec{1.0, 0.0});

  ConstraintSet empty;
  empty.group = Group::Domain;
  CHECK(seen_vocabulary(empty, space).words.empty());

  auto s = make_set(Relation::Attract, Group::Domain, {{"a", "b"}, {"b", "c"}});
  auto seen = seen_vocabulary(s, space);
  CHECK(seen.words == std::vector<std::string>{"a", "b", "c"});
  CHECK(seen.phrase_terms == 0);

  ConstraintSet with_phrase = s;
  with_phrase.insert(TermPair({"zh", "a c"}, {"zh", "b"}));
  with_phrase.insert(TermPair({"zh", "oov"}, {"zh", "a"}));
  auto seen2 = seen_vocabulary(with_phrase, space);
  CHECK(seen2.words == std::vector<std::string>{"a", "b", "c"});
  CHECK(seen2.phrase_terms == 1);
}

TEST_CASE("save/load round trip for constraint files") {
  auto dir = temp_dir("con_rt");
  auto s = make_set(Relation::Attract, Group::Domain,
                    {{"x", "y"}, {"y", "z"}, {"long phrase", "w"}});
  save_constraints(s, (dir / "out.tsv").string());
  auto r = load_constraints((dir / "out.tsv").string(), Relation::Attract,
                            Group::Domain);
  CHECK(r.pairs == s.pairs);
}
