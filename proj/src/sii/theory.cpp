#include <algorithm>
#include <cmath>
#include <map>

#include "ltn/error.hpp"
#include "ltn/sii.hpp"

namespace ltn::sii {

namespace {

Formula unary(const std::string& p, const char* var) {
  return Formula::atom(p, {Term::variable(var)});
}

Formula part_of(const char* a, const char* b) {
  return Formula::atom(kPartOf, {Term::variable(a), Term::variable(b)});
}

Formula literal(const std::string& p, std::vector<std::string> args, bool positive) {
  std::vector<Term> terms;
  for (auto& a : args) terms.push_back(Term::constant(std::move(a)));
  Formula f = Formula::atom(p, std::move(terms));
  return positive ? f : Formula::negation(f);
}

// Picks `count` distinct positions of [0, n) uniformly (partial Fisher-Yates).
std::vector<std::size_t> sample_positions(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(count);
  return idx;
}

std::size_t percent_of(double k, std::size_t n) {
  return static_cast<std::size_t>(std::floor(k * static_cast<double>(n) / 100.0 + 1e-9));
}

}  // namespace

std::vector<Formula> generate_mereology(const PartOntology& onto) {
  onto.check();
  std::vector<Formula> out;
  const std::vector<std::string> xy{"x", "y"};
  out.push_back(Formula::forall(
      xy, Formula::implication(part_of("x", "y"), Formula::negation(part_of("y", "x")))));
  for (const auto& w : onto.wholes) {
    auto parts = onto.parts_of(w);
    if (!parts.empty()) {
      Formula inventory = unary(parts.front(), "x");
      for (std::size_t i = 1; i < parts.size(); ++i)
        inventory = Formula::disjunction(inventory, unary(parts[i], "x"));
      out.push_back(Formula::forall(
          xy, Formula::implication(Formula::conjunction(unary(w, "y"), part_of("x", "y")),
                                   inventory)));
    }
    out.push_back(Formula::forall(
        xy, Formula::implication(unary(w, "x"), Formula::negation(part_of("x", "y")))));
  }
  for (const auto& p : onto.parts)
    out.push_back(Formula::forall(
        xy, Formula::implication(unary(p, "x"), Formula::negation(part_of("y", "x")))));
  return out;
}

TheoryMode parse_mode(const std::string& s) {
  if (s == "expl") return TheoryMode::Expl;
  if (s == "prior") return TheoryMode::Prior;
  throw InvalidSpec("unknown theory mode '" + s + "' (expected expl or prior)");
}

Signature sii_signature(const std::vector<std::string>& classes) {
  Signature sig;
  for (const auto& c : classes) sig.add_predicate(c, 1);
  sig.add_predicate(kPartOf, 2);
  return sig;
}

GroundedTheory build_theory(const Dataset& ds, const PartOntology& onto, TheoryMode mode,
                            const TheoryConfig& cfg) {
  onto.check();
  for (const auto& c : onto.wholes) ds.class_index(c);
  for (const auto& c : onto.parts) ds.class_index(c);
  auto train = ds.split_indices(false);
  if (train.empty()) throw InvalidSpec("the dataset has no training boxes");

  GroundedTheory t;
  t.kb.signature = sii_signature(ds.classes);
  t.grounding = {ds.classes.size() + 4, cfg.k};
  t.logic = cfg.logic;
  for (std::size_t i : train) {
    const auto& b = ds.boxes[i];
    if (!b.label) throw MissingLabels("training box '" + b.id + "' has no label");
    t.kb.signature.add_constant(b.id);
    t.fixed_constants[b.id] = feature_vector(b);
    t.domain.group_of[b.id] = b.image;
  }
  t.domain.distinct = true;

  auto& formulas = t.kb.formulas;
  for (std::size_t i : train) {
    const auto& b = ds.boxes[i];
    formulas.push_back(literal(*b.label, {b.id}, true));
    for (const auto& c : ds.classes)
      if (c != *b.label) formulas.push_back(literal(c, {b.id}, false));
  }

  std::vector<std::string> images;
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> negatives;
  for (auto [i, j] : ds.same_image_pairs(train)) {
    if (ds.is_part(i, j)) {
      formulas.push_back(literal(kPartOf, {ds.boxes[i].id, ds.boxes[j].id}, true));
      continue;
    }
    auto& list = negatives[ds.boxes[i].image];
    if (list.empty()) images.push_back(ds.boxes[i].image);
    list.emplace_back(i, j);
  }
  Rng rng(cfg.seed);
  for (const auto& image : images) {
    const auto& list = negatives[image];
    std::vector<std::size_t> keep(list.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    if (cfg.max_negative_pairs_per_image > 0 && list.size() > cfg.max_negative_pairs_per_image) {
      keep = sample_positions(list.size(), cfg.max_negative_pairs_per_image, rng);
      std::sort(keep.begin(), keep.end());
    }
    for (std::size_t k : keep)
      formulas.push_back(
          literal(kPartOf, {ds.boxes[list[k].first].id, ds.boxes[list[k].second].id}, false));
  }

  if (mode == TheoryMode::Prior)
    for (auto& m : generate_mereology(onto)) formulas.push_back(std::move(m));

  Signature preds;
  preds.predicates = t.kb.signature.predicates;
  t.params = init_parameters(t.grounding, preds, cfg.seed);
  t.check();
  return t;
}

Dataset inject_noise(const Dataset& ds, double k_percent, std::uint64_t seed) {
  if (!(k_percent >= 0.0 && k_percent <= 100.0))
    throw InvalidSpec("noise level must lie in [0, 100]");
  Dataset out = ds;
  Rng rng(seed);
  auto train = out.split_indices(false);

  std::size_t relabel = percent_of(k_percent, train.size());
  if (relabel > 0 && out.classes.size() < 2)
    throw InvalidSpec("relabeling needs at least two classes");
  for (std::size_t pos : sample_positions(train.size(), relabel, rng)) {
    auto& b = out.boxes[train[pos]];
    if (!b.label) throw MissingLabels("training box '" + b.id + "' has no label");
    std::size_t current = out.class_index(*b.label);
    std::size_t next = rng.index(out.classes.size() - 1);
    if (next >= current) ++next;
    b.label = out.classes[next];
  }

  auto pairs = out.same_image_pairs(train);
  std::size_t flips = percent_of(k_percent, pairs.size());
  for (std::size_t pos : sample_positions(pairs.size(), flips, rng)) {
    auto [i, j] = pairs[pos];
    auto& parents = out.boxes[i].parents;
    const std::string& whole = out.boxes[j].id;
    auto it = std::find(parents.begin(), parents.end(), whole);
    if (it != parents.end())
      parents.erase(it);
    else
      parents.insert(std::upper_bound(parents.begin(), parents.end(), whole), whole);
  }
  return out;
}

}  // namespace ltn::sii
