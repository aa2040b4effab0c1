#include <algorithm>
#include <limits>

#include "ltn/ast.hpp"
#include "ltn/error.hpp"

namespace ltn {

std::set<std::string> free_variables(const Term& t) {
  std::set<std::string> out;
  if (t.is_variable()) {
    out.insert(t.name());
    return out;
  }
  for (const auto& a : t.args()) {
    auto sub = free_variables(a);
    out.insert(sub.begin(), sub.end());
  }
  return out;
}

std::set<std::string> free_variables(const Formula& f) {
  using K = Formula::Kind;
  std::set<std::string> out;
  switch (f.kind()) {
    case K::Atom:
      for (const auto& a : f.args()) {
        auto sub = free_variables(a);
        out.insert(sub.begin(), sub.end());
      }
      break;
    case K::Not:
      out = free_variables(f.lhs());
      break;
    case K::And:
    case K::Or:
    case K::Implies: {
      out = free_variables(f.lhs());
      auto r = free_variables(f.rhs());
      out.insert(r.begin(), r.end());
      break;
    }
    case K::Forall:
    case K::Exists:
      out = free_variables(f.body());
      out.erase(f.name());
      break;
  }
  return out;
}

bool is_closed(const Formula& f) { return free_variables(f).empty(); }

bool contains_exists(const Formula& f) {
  using K = Formula::Kind;
  switch (f.kind()) {
    case K::Atom:
      return false;
    case K::Not:
      return contains_exists(f.lhs());
    case K::Exists:
      return true;
    case K::Forall:
      return contains_exists(f.body());
    default:
      return contains_exists(f.lhs()) || contains_exists(f.rhs());
  }
}

bool is_quantifier_free(const Formula& f) {
  using K = Formula::Kind;
  switch (f.kind()) {
    case K::Atom:
      return true;
    case K::Not:
      return is_quantifier_free(f.lhs());
    case K::Forall:
    case K::Exists:
      return false;
    default:
      return is_quantifier_free(f.lhs()) && is_quantifier_free(f.rhs());
  }
}

int depth(const Formula& f) {
  if (f.is_atom()) return 1;
  if (f.is_binary()) return 1 + std::max(depth(f.lhs()), depth(f.rhs()));
  return 1 + depth(f.lhs());
}

// ---------------------------------------------------------------------------
// Substitution

Term substitute(const Term& t, const std::string& var, const Term& replacement) {
  switch (t.kind()) {
    case Term::Kind::Variable:
      return t.name() == var ? replacement : t;
    case Term::Kind::Constant:
      return t;
    case Term::Kind::Function: {
      std::vector<Term> args;
      args.reserve(t.args().size());
      for (const auto& a : t.args()) args.push_back(substitute(a, var, replacement));
      return Term::function(t.name(), std::move(args));
    }
  }
  return t;
}

namespace {

std::string fresh_variable(const std::string& base, const std::set<std::string>& avoid) {
  for (int i = 1;; ++i) {
    std::string cand = base + "_" + std::to_string(i);
    if (!avoid.count(cand)) return cand;
  }
}

void collect_all_variables(const Formula& f, std::set<std::string>& out) {
  if (f.is_atom()) {
    for (const auto& a : f.args()) {
      auto v = free_variables(a);
      out.insert(v.begin(), v.end());
    }
    return;
  }
  if (f.is_quantifier()) out.insert(f.name());
  collect_all_variables(f.lhs(), out);
  if (f.is_binary()) collect_all_variables(f.rhs(), out);
}

}  // namespace

Formula substitute(const Formula& f, const std::string& var, const Term& replacement) {
  using K = Formula::Kind;
  switch (f.kind()) {
    case K::Atom: {
      std::vector<Term> args;
      args.reserve(f.args().size());
      for (const auto& a : f.args()) args.push_back(substitute(a, var, replacement));
      return Formula::atom(f.name(), std::move(args));
    }
    case K::Not:
      return Formula::negation(substitute(f.lhs(), var, replacement));
    case K::And:
    case K::Or:
    case K::Implies:
      return Formula::binary(f.kind(), substitute(f.lhs(), var, replacement),
                             substitute(f.rhs(), var, replacement));
    case K::Forall:
    case K::Exists: {
      if (f.name() == var) return f;
      if (!free_variables(f.body()).count(var)) return f;
      auto repl_vars = free_variables(replacement);
      std::string bound = f.name();
      Formula body = f.body();
      if (repl_vars.count(bound)) {
        std::set<std::string> avoid = repl_vars;
        collect_all_variables(f, avoid);
        avoid.insert(var);
        std::string renamed = fresh_variable(bound, avoid);
        body = substitute(body, bound, Term::variable(renamed));
        bound = renamed;
      }
      body = substitute(body, var, replacement);
      return f.kind() == K::Forall ? Formula::forall(bound, std::move(body))
                                   : Formula::exists(bound, std::move(body));
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Printing

std::string to_string(const Term& t) {
  if (t.kind() != Term::Kind::Function) return t.name();
  std::string out = t.name() + "(";
  for (std::size_t i = 0; i < t.args().size(); ++i) {
    if (i) out += ", ";
    out += to_string(t.args()[i]);
  }
  return out + ")";
}

std::string to_string(const Formula& f) {
  using K = Formula::Kind;
  switch (f.kind()) {
    case K::Atom: {
      std::string out = f.name() + "(";
      for (std::size_t i = 0; i < f.args().size(); ++i) {
        if (i) out += ", ";
        out += to_string(f.args()[i]);
      }
      return out + ")";
    }
    case K::Not:
      return "not " + to_string(f.lhs());
    case K::And:
      return "(" + to_string(f.lhs()) + " and " + to_string(f.rhs()) + ")";
    case K::Or:
      return "(" + to_string(f.lhs()) + " or " + to_string(f.rhs()) + ")";
    case K::Implies:
      return "(" + to_string(f.lhs()) + " -> " + to_string(f.rhs()) + ")";
    case K::Forall:
      return "forall " + f.name() + " (" + to_string(f.body()) + ")";
    case K::Exists:
      return "exists " + f.name() + " (" + to_string(f.body()) + ")";
  }
  return {};
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void check_term(const Term& t, const Signature& sig, std::size_t index,
                std::vector<Diagnostic>& out) {
  switch (t.kind()) {
    case Term::Kind::Variable:
      return;
    case Term::Kind::Constant:
      if (!sig.is_constant(t.name()))
        out.push_back({index, "UnknownSymbol", "constant '" + t.name() + "' is not declared"});
      return;
    case Term::Kind::Function: {
      auto it = sig.functions.find(t.name());
      if (it == sig.functions.end()) {
        out.push_back({index, "UnknownSymbol", "function '" + t.name() + "' is not declared"});
      } else if (static_cast<std::size_t>(it->second) != t.args().size()) {
        out.push_back({index, "ArityMismatch",
                       "function '" + t.name() + "': expected " + std::to_string(it->second) +
                           ", got " + std::to_string(t.args().size())});
      }
      for (const auto& a : t.args()) check_term(a, sig, index, out);
      return;
    }
  }
}

void check_formula(const Formula& f, const Signature& sig, std::size_t index,
                   std::vector<Diagnostic>& out) {
  if (f.is_atom()) {
    auto it = sig.predicates.find(f.name());
    if (it == sig.predicates.end()) {
      out.push_back({index, "UnknownSymbol", "predicate '" + f.name() + "' is not declared"});
    } else if (static_cast<std::size_t>(it->second) != f.args().size()) {
      out.push_back({index, "ArityMismatch",
                     "predicate '" + f.name() + "': expected " + std::to_string(it->second) +
                         ", got " + std::to_string(f.args().size())});
    }
    for (const auto& a : f.args()) check_term(a, sig, index, out);
    return;
  }
  check_formula(f.lhs(), sig, index, out);
  if (f.is_binary()) check_formula(f.rhs(), sig, index, out);
}

}  // namespace

std::vector<Diagnostic> validate_kb(const KnowledgeBase& kb) {
  constexpr std::size_t kSignature = std::numeric_limits<std::size_t>::max();
  std::vector<Diagnostic> out;
  try {
    kb.signature.check();
  } catch (const Error& e) {
    out.push_back({kSignature, e.kind(), e.what()});
  }
  for (std::size_t i = 0; i < kb.formulas.size(); ++i) {
    const auto& f = kb.formulas[i];
    check_formula(f, kb.signature, i, out);
    auto fv = free_variables(f);
    if (!fv.empty()) {
      std::string names;
      for (const auto& v : fv) names += (names.empty() ? "" : ", ") + v;
      out.push_back({i, "NotClosed", "free variables: " + names});
    }
  }
  return out;
}

}  // namespace ltn
