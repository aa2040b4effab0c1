#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace ltn {

// The symbol table of a first-order language: constants, function symbols and
// predicate symbols, pairwise disjoint, with arities >= 1.
struct Signature {
  std::set<std::string> constants;
  std::map<std::string, int> functions;
  std::map<std::string, int> predicates;
  // Symbols introduced by Skolemization (a subset of constants/functions).
  std::set<std::string> skolem_symbols;

  bool has_symbol(const std::string& name) const;
  bool is_constant(const std::string& name) const { return constants.count(name) != 0; }
  bool is_function(const std::string& name) const { return functions.count(name) != 0; }
  bool is_predicate(const std::string& name) const { return predicates.count(name) != 0; }

  void add_constant(const std::string& name);
  void add_function(const std::string& name, int arity);
  void add_predicate(const std::string& name, int arity);

  // Throws SymbolCollision / ArityMismatch when the invariants do not hold.
  void check() const;

  // Union of two signatures; conflicting declarations throw.
  Signature merged(const Signature& other) const;

  bool operator==(const Signature&) const = default;
};

class Term {
 public:
  enum class Kind { Variable, Constant, Function };

  static Term variable(std::string name);
  static Term constant(std::string name);
  static Term function(std::string symbol, std::vector<Term> args);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const std::vector<Term>& args() const { return args_; }

  bool is_variable() const { return kind_ == Kind::Variable; }
  bool is_ground() const;

  bool operator==(const Term&) const = default;

 private:
  Term(Kind kind, std::string name, std::vector<Term> args)
      : kind_(kind), name_(std::move(name)), args_(std::move(args)) {}

  Kind kind_;
  std::string name_;
  std::vector<Term> args_;
};

// Immutable formula tree. Children are shared, so copies are cheap and
// structurally equal formulas compare equal with ==.
class Formula {
 public:
  enum class Kind { Atom, Not, And, Or, Implies, Forall, Exists };

  static Formula atom(std::string predicate, std::vector<Term> args);
  static Formula negation(Formula f);
  static Formula conjunction(Formula a, Formula b);
  static Formula disjunction(Formula a, Formula b);
  static Formula implication(Formula a, Formula b);
  static Formula binary(Kind kind, Formula a, Formula b);
  static Formula forall(std::string var, Formula body);
  static Formula exists(std::string var, Formula body);
  // Nested quantifiers over several variables, outermost first.
  static Formula forall(const std::vector<std::string>& vars, Formula body);
  static Formula exists(const std::vector<std::string>& vars, Formula body);

  Kind kind() const { return node_->kind; }
  bool is_atom() const { return kind() == Kind::Atom; }
  bool is_binary() const;
  bool is_quantifier() const { return kind() == Kind::Forall || kind() == Kind::Exists; }

  // Atom: predicate symbol. Quantifier: bound variable.
  const std::string& name() const { return node_->name; }
  const std::vector<Term>& args() const { return node_->args; }
  // Not / quantifier body, or left operand of a binary connective.
  const Formula& lhs() const { return *node_->lhs; }
  const Formula& body() const { return *node_->lhs; }
  const Formula& rhs() const { return *node_->rhs; }

  bool operator==(const Formula& other) const;
  bool operator!=(const Formula& other) const { return !(*this == other); }

 private:
  struct Node {
    Kind kind;
    std::string name;
    std::vector<Term> args;
    std::shared_ptr<const Formula> lhs;
    std::shared_ptr<const Formula> rhs;
  };
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

struct KnowledgeBase {
  Signature signature;
  std::vector<Formula> formulas;
};

std::set<std::string> free_variables(const Term& t);
std::set<std::string> free_variables(const Formula& f);
bool is_closed(const Formula& f);
bool contains_exists(const Formula& f);
bool is_quantifier_free(const Formula& f);
// Number of constructors on the longest root-to-leaf path (an atom has depth 1).
int depth(const Formula& f);

// Capture-avoiding substitution of `replacement` for free occurrences of `var`.
Formula substitute(const Formula& f, const std::string& var, const Term& replacement);
Term substitute(const Term& t, const std::string& var, const Term& replacement);

// Canonical concrete syntax; parse_formula(print(f)) == f.
std::string to_string(const Term& t);
std::string to_string(const Formula& f);

struct Diagnostic {
  std::size_t formula_index;
  std::string kind;  // "NotClosed", "ArityMismatch", "UnknownSymbol", "SymbolCollision"
  std::string message;
};

// Empty iff every KnowledgeBase invariant holds.
std::vector<Diagnostic> validate_kb(const KnowledgeBase& kb);

}  // namespace ltn
