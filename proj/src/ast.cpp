#include "ltn/ast.hpp"

#include <algorithm>
#include <functional>

#include "ltn/error.hpp"

namespace ltn {

// ---------------------------------------------------------------------------
// Signature

bool Signature::has_symbol(const std::string& name) const {
  return is_constant(name) || is_function(name) || is_predicate(name);
}

void Signature::add_constant(const std::string& name) {
  if (is_function(name) || is_predicate(name))
    throw SymbolCollision("'" + name + "' is already declared as a non-constant symbol");
  constants.insert(name);
}

void Signature::add_function(const std::string& name, int arity) {
  if (arity < 1) throw ArityMismatch("function '" + name + "' needs arity >= 1");
  if (is_constant(name) || is_predicate(name))
    throw SymbolCollision("'" + name + "' is already declared as a non-function symbol");
  auto [it, inserted] = functions.emplace(name, arity);
  if (!inserted && it->second != arity)
    throw ArityMismatch("function '" + name + "' redeclared with arity " + std::to_string(arity) +
                        " (was " + std::to_string(it->second) + ")");
}

void Signature::add_predicate(const std::string& name, int arity) {
  if (arity < 1) throw ArityMismatch("predicate '" + name + "' needs arity >= 1");
  if (is_constant(name) || is_function(name))
    throw SymbolCollision("'" + name + "' is already declared as a non-predicate symbol");
  auto [it, inserted] = predicates.emplace(name, arity);
  if (!inserted && it->second != arity)
    throw ArityMismatch("predicate '" + name + "' redeclared with arity " +
                        std::to_string(arity) + " (was " + std::to_string(it->second) + ")");
}

void Signature::check() const {
  for (const auto& c : constants)
    if (is_function(c) || is_predicate(c)) throw SymbolCollision("'" + c + "' declared twice");
  for (const auto& [f, arity] : functions) {
    if (is_predicate(f)) throw SymbolCollision("'" + f + "' declared twice");
    if (arity < 1) throw ArityMismatch("function '" + f + "' has arity < 1");
  }
  for (const auto& [p, arity] : predicates)
    if (arity < 1) throw ArityMismatch("predicate '" + p + "' has arity < 1");
}

Signature Signature::merged(const Signature& other) const {
  Signature out = *this;
  for (const auto& c : other.constants) out.add_constant(c);
  for (const auto& [f, a] : other.functions) out.add_function(f, a);
  for (const auto& [p, a] : other.predicates) out.add_predicate(p, a);
  out.skolem_symbols.insert(other.skolem_symbols.begin(), other.skolem_symbols.end());
  return out;
}

// ---------------------------------------------------------------------------
// Term

Term Term::variable(std::string name) { return Term(Kind::Variable, std::move(name), {}); }
Term Term::constant(std::string name) { return Term(Kind::Constant, std::move(name), {}); }
Term Term::function(std::string symbol, std::vector<Term> args) {
  return Term(Kind::Function, std::move(symbol), std::move(args));
}

bool Term::is_ground() const {
  if (kind_ == Kind::Variable) return false;
  return std::all_of(args_.begin(), args_.end(), [](const Term& a) { return a.is_ground(); });
}

// ---------------------------------------------------------------------------
// Formula

Formula Formula::atom(std::string predicate, std::vector<Term> args) {
  return Formula(std::make_shared<const Node>(
      Node{Kind::Atom, std::move(predicate), std::move(args), nullptr, nullptr}));
}

Formula Formula::negation(Formula f) {
  return Formula(std::make_shared<const Node>(
      Node{Kind::Not, {}, {}, std::make_shared<const Formula>(std::move(f)), nullptr}));
}

Formula Formula::conjunction(Formula a, Formula b) {
  return binary(Kind::And, std::move(a), std::move(b));
}
Formula Formula::disjunction(Formula a, Formula b) {
  return binary(Kind::Or, std::move(a), std::move(b));
}
Formula Formula::implication(Formula a, Formula b) {
  return binary(Kind::Implies, std::move(a), std::move(b));
}

Formula Formula::binary(Kind kind, Formula a, Formula b) {
  if (kind != Kind::And && kind != Kind::Or && kind != Kind::Implies)
    throw std::logic_error("Formula::binary: not a binary connective");
  return Formula(std::make_shared<const Node>(Node{kind, {}, {},
                                                   std::make_shared<const Formula>(std::move(a)),
                                                   std::make_shared<const Formula>(std::move(b))}));
}

Formula Formula::forall(std::string var, Formula body) {
  return Formula(std::make_shared<const Node>(Node{
      Kind::Forall, std::move(var), {}, std::make_shared<const Formula>(std::move(body)), nullptr}));
}

Formula Formula::exists(std::string var, Formula body) {
  return Formula(std::make_shared<const Node>(Node{
      Kind::Exists, std::move(var), {}, std::make_shared<const Formula>(std::move(body)), nullptr}));
}

Formula Formula::forall(const std::vector<std::string>& vars, Formula body) {
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) body = forall(*it, std::move(body));
  return body;
}

Formula Formula::exists(const std::vector<std::string>& vars, Formula body) {
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) body = exists(*it, std::move(body));
  return body;
}

bool Formula::is_binary() const {
  return kind() == Kind::And || kind() == Kind::Or || kind() == Kind::Implies;
}

bool Formula::operator==(const Formula& other) const {
  if (node_ == other.node_) return true;
  if (kind() != other.kind()) return false;
  switch (kind()) {
    case Kind::Atom:
      return name() == other.name() && args() == other.args();
    case Kind::Not:
      return lhs() == other.lhs();
    case Kind::And:
    case Kind::Or:
    case Kind::Implies:
      return lhs() == other.lhs() && rhs() == other.rhs();
    case Kind::Forall:
    case Kind::Exists:
      return name() == other.name() && body() == other.body();
  }
  return false;
}

}  // namespace ltn
