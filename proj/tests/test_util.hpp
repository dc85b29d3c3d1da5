// Shared fixture builders and independent oracles for the test suites.
// Oracles here are deliberately written as plain second implementations and
// must not call into the library code paths they check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sexwes/embedding.hpp"
#include "sexwes/rng.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sexwes_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Random space of unique words w000..; rows drawn from a unit gaussian and
// optionally normalized.
inline sexwes::EmbeddingSpace random_space(std::size_t n, std::size_t dim,
                                           std::uint64_t seed,
                                           bool normalize = true,
                                           const std::string& prefix = "w") {
  sexwes::Rng rng(seed);
  sexwes::EmbeddingSpace space;
  space.dim = dim;
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%s%03zu", prefix.c_str(), i);
    sexwes::Vec v(dim);
    double sq = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      sq += x * x;
    }
    if (normalize) {
      const double inv = 1.0 / std::sqrt(sq);
      for (auto& x : v) x *= inv;
    }
    space.add(buf, v);
  }
  return space;
}

// Space where word p1_i is a small perturbation of word p0_i, so (p0_i, p1_i)
// pairs have high cosine while cross-index pairs look random. Used to plant
// separable relation data.
inline sexwes::EmbeddingSpace paired_space(std::size_t npairs, std::size_t dim,
                                           std::uint64_t seed,
                                           double nudge = 0.25) {
  sexwes::Rng rng(seed);
  sexwes::EmbeddingSpace space;
  space.dim = dim;
  char buf[32];
  for (std::size_t i = 0; i < npairs; ++i) {
    sexwes::Vec base(dim);
    double sq = 0.0;
    for (auto& x : base) {
      x = rng.normal();
      sq += x * x;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& x : base) x *= inv;

    sexwes::Vec twin = base;
    double tn = 0.0;
    for (auto& x : twin) {
      x += nudge * rng.normal();
      tn += x * x;
    }
    const double tinv = 1.0 / std::sqrt(tn);
    for (auto& x : twin) x *= tinv;

    std::snprintf(buf, sizeof(buf), "p0_%03zu", i);
    space.add(buf, base);
    std::snprintf(buf, sizeof(buf), "p1_%03zu", i);
    space.add(buf, twin);
  }
  return space;
}

// ---- oracles ------------------------------------------------------------

inline double oracle_dot(const std::vector<double>& a,
                         const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double oracle_cosine(const std::vector<double>& a,
                            const std::vector<double>& b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return num / (std::sqrt(na) * std::sqrt(nb));
}

// Full O(n*d) scan, stable sort by (score desc, row asc).
inline std::vector<std::pair<std::size_t, double>> oracle_topk_cosine(
    const sexwes::EmbeddingSpace& space, const std::vector<double>& query,
    std::size_t k) {
  std::vector<std::pair<std::size_t, double>> scored;
  for (std::size_t r = 0; r < space.size(); ++r) {
    std::vector<double> row(space.row(r).begin(), space.row(r).end());
    scored.emplace_back(r, oracle_cosine(query, row));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  scored.resize(k);
  return scored;
}

// Pearson correlation; spearman oracle ranks with explicit mean-of-ties first.
inline double oracle_pearson(const std::vector<double>& a,
                             const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline std::vector<double> oracle_mean_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<double> ranks(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (xs[j] < xs[i]) ++less;
      if (xs[j] == xs[i]) ++equal;
    }
    // ranks of the tie block: less+1 .. less+equal, averaged
    ranks[i] = less + (equal + 1) / 2.0;
  }
  return ranks;
}

inline double oracle_spearman(const std::vector<double>& xs,
                              const std::vector<double>& ys) {
  return oracle_pearson(oracle_mean_ranks(xs), oracle_mean_ranks(ys));
}

}  // namespace testutil
