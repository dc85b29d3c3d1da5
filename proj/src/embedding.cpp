#include "sexwes/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace sexwes {

namespace {

[[noreturn]] void fail_at(const std::string& path, std::size_t line,
                          const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

void EmbeddingSpace::add(const std::string& word, std::span<const double> v) {
  if (dim == 0) dim = v.size();
  index.emplace(word, words.size());
  words.push_back(word);
  data.insert(data.end(), v.begin(), v.end());
}

EmbeddingSpace load_embeddings(const std::string& path, std::size_t limit,
                               EmbeddingLoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty file, expected \"N D\" header");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
    line.pop_back();

  char* end = nullptr;
  const long long count = std::strtoll(line.c_str(), &end, 10);
  const long long dim = std::strtoll(end, &end, 10);
  while (*end == ' ') ++end;
  if (count < 0 || dim <= 0 || *end != '\0')
    fail_at(path, 1, "malformed header, expected \"<vocab_count> <dim>\"");

  EmbeddingSpace space;
  space.dim = static_cast<std::size_t>(dim);
  const std::size_t target =
      limit == 0 ? static_cast<std::size_t>(count)
                 : std::min(limit, static_cast<std::size_t>(count));
  space.words.reserve(target);
  space.data.reserve(target * space.dim);

  EmbeddingLoadStats local;
  Vec coords(space.dim);
  std::size_t line_no = 1;
  while (space.size() < target &&
         local.rows_read < static_cast<std::size_t>(count)) {
    if (!std::getline(in, line))
      fail_at(path, line_no + 1,
              "unexpected end of file, header promised " +
                  std::to_string(count) + " rows");
    ++line_no;
    ++local.rows_read;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();

    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0)
      fail_at(path, line_no, "malformed row, expected \"word c1 ... cD\"");
    const std::string word = line.substr(0, sp);

    const char* p = line.c_str() + sp;
    double sq_norm = 0.0;
    for (std::size_t i = 0; i < space.dim; ++i) {
      char* next = nullptr;
      const double v = std::strtod(p, &next);
      if (next == p)
        fail_at(path, line_no,
                "row has fewer than " + std::to_string(space.dim) +
                    " coordinates");
      if (!std::isfinite(v))
        fail_at(path, line_no, "non-finite coordinate for word \"" + word + "\"");
      coords[i] = v;
      sq_norm += v * v;
      p = next;
    }
    while (*p == ' ') ++p;
    if (*p != '\0')
      fail_at(path, line_no,
              "row has more than " + std::to_string(space.dim) + " coordinates");
    if (sq_norm == 0.0)
      fail_at(path, line_no, "zero vector for word \"" + word + "\"");

    if (space.contains(word)) {
      ++local.duplicates_skipped;
      continue;
    }
    space.add(word, coords);
  }

  if (stats) *stats = local;
  return space;
}

void save_embeddings(const EmbeddingSpace& space, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << space.size() << ' ' << space.dim << '\n';
  for (std::size_t r = 0; r < space.size(); ++r) {
    out << space.words[r];
    const auto row = space.row(r);
    for (double v : row) out << ' ' << format_double(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingSpace unit_normalize(const EmbeddingSpace& space) {
  EmbeddingSpace out = space;
  for (std::size_t r = 0; r < out.size(); ++r) {
    auto row = out.row_mut(r);
    const double n = norm(row);
    if (n == 0.0)
      throw std::runtime_error("zero row for word \"" + out.words[r] + "\"");
    scale_inplace(row, 1.0 / n);
  }
  return out;
}

double cosine(const EmbeddingSpace& space, const std::string& w1,
              const std::string& w2) {
  const auto r1 = space.find(w1);
  if (!r1) throw std::runtime_error("word not in vocabulary: \"" + w1 + "\"");
  const auto r2 = space.find(w2);
  if (!r2) throw std::runtime_error("word not in vocabulary: \"" + w2 + "\"");
  return cosine_similarity(space.row(*r1), space.row(*r2));
}

std::vector<ScoredWord> rank_scores(std::span<const double> scores,
                                    std::size_t k) {
  if (k > scores.size())
    throw std::runtime_error("k = " + std::to_string(k) +
                             " exceeds vocabulary size " +
                             std::to_string(scores.size()));
  std::vector<ScoredWord> all(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) all[i] = {i, scores[i]};
  std::partial_sort(all.begin(), all.begin() + k, all.end(),
                    [](const ScoredWord& a, const ScoredWord& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.row < b.row;
                    });
  all.resize(k);
  return all;
}

std::vector<ScoredWord> nearest_neighbors(const EmbeddingSpace& space,
                                          std::span<const double> query,
                                          std::size_t k) {
  if (query.size() != space.dim)
    throw std::runtime_error("query dimension mismatch");
  const double qn = norm(query);
  if (qn == 0.0) throw std::runtime_error("zero query vector");
  Vec scores(space.size(), 0.0);
  for (std::size_t r = 0; r < space.size(); ++r) {
    const auto row = space.row(r);
    const double rn = norm(row);
    scores[r] = rn == 0.0 ? -2.0 : dot(query, row) / (qn * rn);
  }
  return rank_scores(scores, k);
}

Vec phrase_vector(const EmbeddingSpace& space,
                  const std::vector<std::string>& tokens,
                  std::size_t* oov_count) {
  Vec sum(space.dim, 0.0);
  std::size_t hit = 0, miss = 0;
  for (const auto& tok : tokens) {
    if (auto r = space.find(tok)) {
      axpy(1.0, space.row(*r), sum);
      ++hit;
    } else {
      ++miss;
    }
  }
  if (oov_count) *oov_count = miss;
  if (hit == 0)
    throw std::runtime_error("no phrase token found in vocabulary");
  scale_inplace(sum, 1.0 / static_cast<double>(hit));
  return sum;
}

std::vector<std::string> tokenize_surface(const std::string& surface) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : surface) {
    if (c == ' ' || c == '_') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace sexwes
