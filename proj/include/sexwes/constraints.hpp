// Tagged word/phrase constraint pairs: loading the tab-separated tagged
// format, set-semantics merging, coverage accounting against an embedding
// space and extraction of the constraint-seen vocabulary.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sexwes/embedding.hpp"

namespace sexwes {

enum class Relation { Attract, Repel };
enum class Group { General, Domain, Both, CrossLingual };

const char* to_string(Relation r);
const char* to_string(Group g);

struct LangConfig {
  std::string source = "en";
  std::string target = "zh";
};

struct TaggedTerm {
  std::string lang;
  std::string surface;

  std::string serialized() const { return lang + "_" + surface; }
  std::vector<std::string> tokens() const { return tokenize_surface(surface); }
  bool is_phrase() const { return tokens().size() > 1; }

  bool operator==(const TaggedTerm& o) const {
    return lang == o.lang && surface == o.surface;
  }
  bool operator<(const TaggedTerm& o) const {
    if (lang != o.lang) return lang < o.lang;
    return surface < o.surface;
  }
};

// Unordered pair kept in canonical (a <= b) order.
struct TermPair {
  TaggedTerm a, b;

  TermPair() = default;
  TermPair(TaggedTerm x, TaggedTerm y) {
    if (y < x) std::swap(x, y);
    a = std::move(x);
    b = std::move(y);
  }

  bool operator==(const TermPair& o) const { return a == o.a && b == o.b; }
  bool operator<(const TermPair& o) const {
    if (!(a == o.a)) return a < o.a;
    return b < o.b;
  }
};

// Pairs are held sorted and unique, so iteration order is deterministic.
struct ConstraintSet {
  Relation relation = Relation::Attract;
  Group group = Group::General;
  std::vector<TermPair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool contains(const TermPair& p) const;

  // Inserts while keeping sorted-unique order; returns false on duplicate.
  bool insert(TermPair p);
};

struct ConstraintLoadStats {
  std::size_t self_pairs_dropped = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t comment_lines = 0;
};

// One pair per line: "<lang>_<term><TAB><lang>_<term>"; '#' starts a comment.
// Monolingual groups must be language-consistent; CROSSLINGUAL pairs must
// hold exactly one source and one target term. CROSSLINGUAL REPEL is
// rejected unless allow_crosslingual_repel is set.
ConstraintSet load_constraints(const std::string& path, Relation relation,
                               Group group, const LangConfig& langs = {},
                               bool allow_crosslingual_repel = false,
                               ConstraintLoadStats* stats = nullptr);

void save_constraints(const ConstraintSet& set, const std::string& path);

// Set union of pair sets sharing one relation. Mixing GENERAL and DOMAIN
// yields BOTH; CROSSLINGUAL cannot be mixed with monolingual groups.
ConstraintSet merge(std::span<const ConstraintSet> sets);

struct CoverageReport {
  std::size_t covered_terms = 0;   // unique surfaces present in the vocabulary
  double vocab_fraction = 0.0;     // covered_terms / |vocab|
  std::size_t covered_pairs = 0;   // pairs whose both sides resolve
};

// Monolingual sets only. A term resolves when its surface is a vocabulary
// entry or (for phrases) when every token is.
CoverageReport coverage(const ConstraintSet& set, const EmbeddingSpace& space);

struct SeenVocabulary {
  std::vector<std::string> words;  // sorted unique single-token in-vocab terms
  std::size_t phrase_terms = 0;    // unique multi-token surfaces, not included
};

SeenVocabulary seen_vocabulary(const ConstraintSet& set,
                               const EmbeddingSpace& space);

}  // namespace sexwes
