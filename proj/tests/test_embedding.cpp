#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "sexwes/embedding.hpp"
#include "test_util.hpp"

using namespace sexwes;
using testutil::temp_dir;
using testutil::write_file;

TEST_CASE("load: well-formed header and rows") {
  auto dir = temp_dir("emb_load");
  write_file(dir / "a.vec",
             "3 4\n"
             "alpha 1 0 0 0\n"
             "beta 0 1 0 0\n"
             "gamma 0 0 0.5 0.5\n");
  auto s = load_embeddings((dir / "a.vec").string());
  CHECK(s.size() == 3);
  CHECK(s.dim == 4);
  CHECK(s.words[0] == "alpha");
  CHECK(s.row(2)[2] == doctest::Approx(0.5));
}

TEST_CASE("load: duplicate word keeps first occurrence and is counted") {
  auto dir = temp_dir("emb_dup");
  write_file(dir / "a.vec",
             "3 2\n"
             "a 1 2\n"
             "a 3 4\n"
             "b 5 6\n");
  EmbeddingLoadStats stats;
  auto s = load_embeddings((dir / "a.vec").string(), 0, &stats);
  CHECK(s.size() == 2);
  CHECK(stats.duplicates_skipped == 1);
  CHECK(s.row(*s.find("a"))[0] == doctest::Approx(1.0));
}

TEST_CASE("load: limit truncates in file order") {
  auto dir = temp_dir("emb_limit");
  write_file(dir / "a.vec", "4 2\nw0 1 0\nw1 0 1\nw2 1 1\nw3 2 1\n");
  auto s = load_embeddings((dir / "a.vec").string(), 2);
  CHECK(s.size() == 2);
  CHECK(s.words.back() == "w1");
}

TEST_CASE("load: malformed inputs are rejected with line numbers") {
  auto dir = temp_dir("emb_bad");
  write_file(dir / "h.vec", "x y\n");
  CHECK_THROWS_WITH_AS(load_embeddings((dir / "h.vec").string()),
                       doctest::Contains(":1:"), std::runtime_error);

  write_file(dir / "short.vec", "1 3\nw 1 2\n");
  CHECK_THROWS_WITH_AS(load_embeddings((dir / "short.vec").string()),
                       doctest::Contains(":2:"), std::runtime_error);

  write_file(dir / "long.vec", "1 2\nw 1 2 3\n");
  CHECK_THROWS_AS(load_embeddings((dir / "long.vec").string()),
                  std::runtime_error);

  write_file(dir / "nan.vec", "1 2\nw nan 1\n");
  CHECK_THROWS_WITH_AS(load_embeddings((dir / "nan.vec").string()),
                       doctest::Contains("non-finite"), std::runtime_error);

  write_file(dir / "zero.vec", "1 2\nw 0 0\n");
  CHECK_THROWS_WITH_AS(load_embeddings((dir / "zero.vec").string()),
                       doctest::Contains("zero vector"), std::runtime_error);
}

TEST_CASE("save/load round trip preserves order and coordinates") {
  auto dir = temp_dir("emb_rt");
  auto s = testutil::random_space(17, 5, 42, /*normalize=*/false);
  // exercise the stated precision contract explicitly
  Vec v(5, 0.0);
  v[0] = 0.123456789;
  s.add("precise", v);

  save_embeddings(s, (dir / "s.vec").string());
  auto r = load_embeddings((dir / "s.vec").string());
  REQUIRE(r.size() == s.size());
  CHECK(r.words == s.words);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.dim; ++j)
      CHECK(std::abs(r.row(i)[j] - s.row(i)[j]) < 1e-6);
  CHECK(r.row(*r.find("precise"))[0] == doctest::Approx(0.123456789).epsilon(1e-9));
}

TEST_CASE("save: empty space writes a bare header") {
  auto dir = temp_dir("emb_empty");
  EmbeddingSpace s;
  s.dim = 7;
  save_embeddings(s, (dir / "e.vec").string());
  CHECK(testutil::read_file(dir / "e.vec") == "0 7\n");
}

TEST_CASE("unit_normalize: 3-4-5 row and idempotence") {
  EmbeddingSpace s;
  s.dim = 2;
  s.add("a", Vec{3.0, 4.0});
  auto n = unit_normalize(s);
  CHECK(n.row(0)[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(n.row(0)[1] == doctest::Approx(0.8).epsilon(1e-12));

  auto nn = unit_normalize(n);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK(std::abs(nn.row(0)[j] - n.row(0)[j]) < 1e-9);
}

TEST_CASE("unit_normalize: random matrix rows end up at norm 1, directions kept") {
  auto s = testutil::random_space(10, 5, 7, /*normalize=*/false);
  auto n = unit_normalize(s);
  for (std::size_t r = 0; r < n.size(); ++r) {
    // independent norm summation
    double sq = 0.0;
    for (double x : n.row(r)) sq += x * x;
    CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-6);
    std::vector<double> before(s.row(r).begin(), s.row(r).end());
    std::vector<double> after(n.row(r).begin(), n.row(r).end());
    CHECK(testutil::oracle_cosine(before, after) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("unit_normalize preserves pairwise cosines") {
  auto s = testutil::random_space(8, 6, 11, /*normalize=*/false);
  auto n = unit_normalize(s);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      CHECK(std::abs(cosine(s, s.words[i], s.words[j]) -
                     cosine(n, n.words[i], n.words[j])) < 1e-9);
}

TEST_CASE("cosine: identity, orthogonality, oracle agreement, OOV error") {
  EmbeddingSpace s;
  s.dim = 3;
  s.add("x", Vec{1, 0, 0});
  s.add("y", Vec{0, 2, 0});
  s.add("z", Vec{1, 0, 0});
  CHECK(cosine(s, "x", "x") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine(s, "x", "y") == doctest::Approx(0.0));
  CHECK(cosine(s, "x", "z") == doctest::Approx(1.0));
  CHECK(cosine(s, "x", "y") == cosine(s, "y", "x"));
  CHECK_THROWS_WITH_AS(cosine(s, "x", "nope"), doctest::Contains("nope"),
                       std::runtime_error);

  auto r = testutil::random_space(20, 8, 3);
  sexwes::Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    auto i = rng.index(r.size());
    auto j = rng.index(r.size());
    std::vector<double> a(r.row(i).begin(), r.row(i).end());
    std::vector<double> b(r.row(j).begin(), r.row(j).end());
    CHECK(std::abs(cosine(r, r.words[i], r.words[j]) -
                   testutil::oracle_cosine(a, b)) < 1e-9);
  }
}

TEST_CASE("nearest_neighbors: exact match ranks first with score 1") {
  auto s = testutil::random_space(30, 6, 9);
  Vec q(s.row(13).begin(), s.row(13).end());
  auto top = nearest_neighbors(s, q, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].row == 13);
  CHECK(top[0].score == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nearest_neighbors: k == |vocab| returns a permutation") {
  auto s = testutil::random_space(25, 4, 21);
  Vec q(s.row(0).begin(), s.row(0).end());
  auto all = nearest_neighbors(s, q, s.size());
  std::vector<bool> seen(s.size(), false);
  for (const auto& sw : all) {
    CHECK(!seen[sw.row]);
    seen[sw.row] = true;
  }
  CHECK_THROWS_AS(nearest_neighbors(s, q, s.size() + 1), std::runtime_error);
}

TEST_CASE("nearest_neighbors: matches brute-force oracle on 50 random queries") {
  auto s = testutil::random_space(100, 10, 77);
  sexwes::Rng rng(123);
  for (int t = 0; t < 50; ++t) {
    Vec q(s.dim);
    for (auto& x : q) x = rng.normal();
    auto got = nearest_neighbors(s, q, 10);
    auto want = testutil::oracle_topk_cosine(s, q, 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(got[i].row == want[i].first);
      CHECK(std::abs(got[i].score - want[i].second) < 1e-9);
    }
  }
}

TEST_CASE("nearest_neighbors: ties broken by ascending row index") {
  EmbeddingSpace s;
  s.dim = 2;
  s.add("b", Vec{1, 0});
  s.add("a", Vec{1, 0});
  s.add("c", Vec{0, 1});
  Vec q{1, 0};
  auto top = nearest_neighbors(s, q, 2);
  CHECK(top[0].row == 0);
  CHECK(top[1].row == 1);
}

TEST_CASE("phrase_vector: single token, repeated token, componentwise mean") {
  EmbeddingSpace s;
  s.dim = 3;
  s.add("a", Vec{1, 2, 3});
  s.add("b", Vec{3, 0, 1});

  auto one = phrase_vector(s, {"a"});
  CHECK(one == Vec{1, 2, 3});

  auto twice = phrase_vector(s, {"a", "a"});
  CHECK(twice == Vec{1, 2, 3});

  auto mean = phrase_vector(s, {"a", "b"});
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(mean[j] == doctest::Approx((s.row(0)[j] + s.row(1)[j]) / 2.0));

  std::size_t oov = 0;
  auto partial = phrase_vector(s, {"a", "missing"}, &oov);
  CHECK(oov == 1);
  CHECK(partial == Vec{1, 2, 3});

  CHECK_THROWS_AS(phrase_vector(s, {"nope", "nada"}), std::runtime_error);
}

TEST_CASE("tokenize_surface splits on spaces and underscores") {
  CHECK(tokenize_surface("angelic b*tch") ==
        std::vector<std::string>{"angelic", "b*tch"});
  CHECK(tokenize_surface("one_two three") ==
        std::vector<std::string>{"one", "two", "three"});
  CHECK(tokenize_surface("solo") == std::vector<std::string>{"solo"});
}
