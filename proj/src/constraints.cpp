#include "sexwes/constraints.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace sexwes {

const char* to_string(Relation r) {
  return r == Relation::Attract ? "attract" : "repel";
}

const char* to_string(Group g) {
  switch (g) {
    case Group::General: return "general";
    case Group::Domain: return "domain";
    case Group::Both: return "both";
    case Group::CrossLingual: return "crosslingual";
  }
  return "?";
}

bool ConstraintSet::contains(const TermPair& p) const {
  return std::binary_search(pairs.begin(), pairs.end(), p);
}

bool ConstraintSet::insert(TermPair p) {
  auto it = std::lower_bound(pairs.begin(), pairs.end(), p);
  if (it != pairs.end() && *it == p) return false;
  pairs.insert(it, std::move(p));
  return true;
}

namespace {

TaggedTerm parse_term(const std::string& field, const std::string& path,
                      std::size_t line_no) {
  const std::size_t us = field.find('_');
  if (us == std::string::npos || us == 0 || us + 1 >= field.size())
    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                             ": term missing language tag: \"" + field + "\"");
  return {field.substr(0, us), field.substr(us + 1)};
}

void check_lang(const TaggedTerm& t, const LangConfig& langs,
                const std::string& path, std::size_t line_no) {
  if (t.lang != langs.source && t.lang != langs.target)
    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                             ": unknown language tag \"" + t.lang + "\"");
}

}  // namespace

ConstraintSet load_constraints(const std::string& path, Relation relation,
                               Group group, const LangConfig& langs,
                               bool allow_crosslingual_repel,
                               ConstraintLoadStats* stats) {
  if (group == Group::CrossLingual && relation == Relation::Repel &&
      !allow_crosslingual_repel)
    throw std::runtime_error(
        "cross-lingual REPEL constraints are not accepted by default: " + path);

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open constraint file: " + path);

  ConstraintSet set;
  set.relation = relation;
  set.group = group;
  ConstraintLoadStats local;

  std::string mono_lang;  // inferred from the first pair of a monolingual set
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      ++local.comment_lines;
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected two tab-separated tagged terms");
    TaggedTerm a = parse_term(line.substr(0, tab), path, line_no);
    TaggedTerm b = parse_term(line.substr(tab + 1), path, line_no);
    check_lang(a, langs, path, line_no);
    check_lang(b, langs, path, line_no);

    if (group == Group::CrossLingual) {
      const bool one_each = (a.lang == langs.source && b.lang == langs.target) ||
                            (a.lang == langs.target && b.lang == langs.source);
      if (!one_each)
        throw std::runtime_error(
            path + ":" + std::to_string(line_no) +
            ": cross-lingual pair needs one source and one target term");
    } else {
      if (a.lang != b.lang)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": language mismatch in monolingual pair");
      if (mono_lang.empty()) mono_lang = a.lang;
      if (a.lang != mono_lang)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": file mixes languages \"" + mono_lang +
                                 "\" and \"" + a.lang + "\"");
    }

    if (a == b) {
      ++local.self_pairs_dropped;
      continue;
    }
    if (!set.insert(TermPair(std::move(a), std::move(b))))
      ++local.duplicates_dropped;
  }

  if (stats) *stats = local;
  return set;
}

void save_constraints(const ConstraintSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& p : set.pairs)
    out << p.a.serialized() << '\t' << p.b.serialized() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

ConstraintSet merge(std::span<const ConstraintSet> sets) {
  if (sets.empty()) throw std::runtime_error("merge of zero constraint sets");
  ConstraintSet out;
  out.relation = sets.front().relation;

  bool saw_general = false, saw_domain = false, saw_both = false,
       saw_cross = false;
  std::vector<TermPair> all;
  for (const auto& s : sets) {
    if (s.relation != out.relation)
      throw std::runtime_error("merge of constraint sets with mixed relations");
    switch (s.group) {
      case Group::General: saw_general = true; break;
      case Group::Domain: saw_domain = true; break;
      case Group::Both: saw_both = true; break;
      case Group::CrossLingual: saw_cross = true; break;
    }
    all.insert(all.end(), s.pairs.begin(), s.pairs.end());
  }
  if (saw_cross && (saw_general || saw_domain || saw_both))
    throw std::runtime_error(
        "cannot merge cross-lingual with monolingual constraint sets");

  if (saw_cross) out.group = Group::CrossLingual;
  else if (saw_both || (saw_general && saw_domain)) out.group = Group::Both;
  else if (saw_domain) out.group = Group::Domain;
  else out.group = Group::General;

  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  out.pairs = std::move(all);
  return out;
}

namespace {

bool term_resolves(const TaggedTerm& t, const EmbeddingSpace& space) {
  if (space.contains(t.surface)) return true;
  const auto toks = t.tokens();
  if (toks.size() < 2) return false;
  for (const auto& tok : toks)
    if (!space.contains(tok)) return false;
  return true;
}

}  // namespace

CoverageReport coverage(const ConstraintSet& set, const EmbeddingSpace& space) {
  if (set.group == Group::CrossLingual)
    throw std::runtime_error("coverage requires a monolingual constraint set");

  std::set<std::string> covered;
  CoverageReport rep;
  for (const auto& p : set.pairs) {
    if (space.contains(p.a.surface)) covered.insert(p.a.surface);
    if (space.contains(p.b.surface)) covered.insert(p.b.surface);
    if (term_resolves(p.a, space) && term_resolves(p.b, space))
      ++rep.covered_pairs;
  }
  rep.covered_terms = covered.size();
  rep.vocab_fraction =
      space.size() == 0
          ? 0.0
          : static_cast<double>(rep.covered_terms) / static_cast<double>(space.size());
  return rep;
}

SeenVocabulary seen_vocabulary(const ConstraintSet& set,
                               const EmbeddingSpace& space) {
  if (set.group == Group::CrossLingual)
    throw std::runtime_error("seen vocabulary requires a monolingual set");

  std::set<std::string> words;
  std::set<std::string> phrases;
  for (const auto& p : set.pairs) {
    for (const TaggedTerm* t : {&p.a, &p.b}) {
      if (space.contains(t->surface)) {
        words.insert(t->surface);
      } else if (t->is_phrase()) {
        phrases.insert(t->surface);
      }
    }
  }
  SeenVocabulary out;
  out.words.assign(words.begin(), words.end());
  out.phrase_terms = phrases.size();
  return out;
}

}  // namespace sexwes
