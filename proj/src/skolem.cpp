#include "ltn/skolem.hpp"

#include <algorithm>

#include "ltn/error.hpp"

namespace ltn {

namespace {

class Skolemizer {
 public:
  explicit Skolemizer(Signature sig) : sig_(std::move(sig)) {}

  Formula run(const Formula& f, bool positive, std::vector<std::string>& universals) {
    using K = Formula::Kind;
    if (!contains_exists(f)) return f;
    switch (f.kind()) {
      case K::Atom:
        return f;
      case K::Not:
        return Formula::negation(run(f.lhs(), !positive, universals));
      case K::And:
      case K::Or:
        return Formula::binary(f.kind(), run(f.lhs(), positive, universals),
                               run(f.rhs(), positive, universals));
      case K::Implies:
        return Formula::implication(run(f.lhs(), !positive, universals),
                                    run(f.rhs(), positive, universals));
      case K::Forall: {
        if (positive) universals.push_back(f.name());
        Formula body = run(f.body(), positive, universals);
        if (positive) universals.pop_back();
        return Formula::forall(f.name(), std::move(body));
      }
      case K::Exists: {
        if (!positive) {
          // ∃y φ ≡ ¬∀y¬φ; the inner φ keeps the polarity of the ∃ itself.
          Formula body = run(f.body(), positive, universals);
          return Formula::negation(Formula::forall(f.name(), Formula::negation(std::move(body))));
        }
        Term witness = fresh_witness(universals);
        return run(substitute(f.body(), f.name(), witness), positive, universals);
      }
    }
    return f;
  }

  Signature& signature() { return sig_; }

 private:
  Term fresh_witness(const std::vector<std::string>& universals) {
    // Innermost binding wins when a variable name is rebound.
    std::vector<std::string> args;
    for (auto it = universals.rbegin(); it != universals.rend(); ++it)
      if (std::find(args.begin(), args.end(), *it) == args.end()) args.push_back(*it);
    std::reverse(args.begin(), args.end());

    std::string name = "sk" + std::to_string(sig_.skolem_symbols.size() + 1);
    if (sig_.has_symbol(name))
      throw SymbolCollision("Skolem symbol '" + name + "' collides with a declared symbol");
    sig_.skolem_symbols.insert(name);
    if (args.empty()) {
      sig_.add_constant(name);
      return Term::constant(name);
    }
    sig_.add_function(name, static_cast<int>(args.size()));
    std::vector<Term> terms;
    for (const auto& a : args) terms.push_back(Term::variable(a));
    return Term::function(name, std::move(terms));
  }

  Signature sig_;
};

}  // namespace

SkolemResult skolemize(const Formula& f, const Signature& sig) {
  auto fv = free_variables(f);
  if (!fv.empty()) throw NotClosed("cannot Skolemize open formula " + to_string(f));
  Skolemizer s(sig);
  std::vector<std::string> universals;
  Formula out = s.run(f, true, universals);
  return {out, s.signature()};
}

KnowledgeBase skolemize_kb(const KnowledgeBase& kb) {
  KnowledgeBase out;
  out.signature = kb.signature;
  for (const auto& f : kb.formulas) {
    auto r = skolemize(f, out.signature);
    out.formulas.push_back(r.formula);
    out.signature = std::move(r.signature);
  }
  return out;
}

}  // namespace ltn
