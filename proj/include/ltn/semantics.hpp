#pragma once

#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ltn/ast.hpp"
#include "ltn/autodiff.hpp"
#include "ltn/grounding.hpp"

namespace ltn {

enum class TNorm { Lukasiewicz, Product, Goedel };
enum class Connective { Not, And, Or, Implies };

TNorm parse_tnorm(const std::string& name);  // lukasiewicz | product | goedel
std::string to_string(TNorm t);

// Semantics of the universal quantifier: mean_p or the minimum.
struct Aggregator {
  enum class Kind { MeanP, Min };
  Kind kind = Kind::MeanP;
  int p = -1;

  static Aggregator mean(int p);
  static Aggregator min() { return {Kind::Min, 0}; }
  static Aggregator parse(const std::string& spec);  // "mean:<p>" | "min"
  std::string str() const;
};

constexpr double kDefaultEps = 1e-6;

// Truth-value arithmetic on plain doubles. Inputs must lie in [0, 1] (with
// 1e-12 slack, then clamped) or OutOfRange is thrown.
double apply_connective(TNorm t, Connective c, double a, double b = 0.0);
// MeanP clamps each value to [eps, 1] first. Throws EmptyDomain on no values.
double aggregate(const Aggregator& agg, const std::vector<double>& values, double eps = kDefaultEps);

// Graph versions. `a`, `b` are truth vectors of equal shape (or scalars).
constexpr ad::NodeId kNoNode = std::numeric_limits<ad::NodeId>::max();
ad::NodeId connective_node(ad::Graph& g, TNorm t, Connective c, ad::NodeId a,
                           ad::NodeId b = kNoNode);
// Aggregates a rank-1 truth vector, per segment when `segments` > 0
// (result [segments]) or entirely (result []).
ad::NodeId aggregate_node(ad::Graph& g, const Aggregator& agg, ad::NodeId values, double eps,
                          std::vector<std::size_t> segment_of = {}, std::size_t segments = 0);

// The finite set of constants quantifiers range over.
struct Domain {
  // Candidates for every variable; empty means "every grounded constant".
  std::vector<std::string> constants;
  // Per-variable overrides of `constants`.
  std::map<std::string, std::vector<std::string>> per_variable;
  // Optional grouping key per constant. When set, a tuple bound by nested
  // quantifiers only combines constants from the same group.
  std::map<std::string, std::string> group_of;
  // Drop tuples that bind the same constant twice.
  bool distinct = false;
};

struct LogicConfig {
  TNorm tnorm = TNorm::Lukasiewicz;
  Aggregator aggregator = Aggregator::mean(-1);
  double eps = kDefaultEps;
};

// Rule-based predicate grounding over argument vectors.
using FixedPredicate = std::function<double(const std::vector<Vec>& args)>;

// A knowledge base together with a partial fixed grounding and learnable
// parameters for everything the fixed grounding leaves open.
struct GroundedTheory {
  KnowledgeBase kb;
  GroundingConfig grounding;
  LogicConfig logic;
  std::map<std::string, Vec> fixed_constants;
  std::map<std::string, FixedPredicate> fixed_predicates;
  ad::ParamStore params;
  Domain domain;

  // Every symbol of the signature covered exactly once; formulas closed and
  // free of existential quantifiers; shapes consistent.
  void check() const;
};

// Compiles formulas of one theory into a shared graph. Subformulas, atoms and
// quantifier frames are memoized, so compiling many formulas that share
// structure does the shared work once.
class FormulaCompiler {
 public:
  FormulaCompiler(const GroundedTheory& theory, ad::Graph& g);

  // A [1]-shaped truth node for a closed, ∃-free formula.
  ad::NodeId compile(const Formula& f);

  // Truths [L] of P(args_i) (negated when `negated`) for tuples of constants.
  ad::NodeId compile_literals(const std::string& predicate,
                              const std::vector<std::vector<std::string>>& args, bool negated);

  // Parameter bindings for the graph built so far.
  ad::Bindings bindings() const;

 private:
  struct Frame {
    std::vector<std::string> vars;
    std::vector<std::vector<std::size_t>> rows;  // constant indices per var
    std::size_t parent = 0;
    std::vector<std::size_t> parent_row;  // per row
  };

  ad::NodeId formula(const Formula& f, std::size_t frame);
  ad::NodeId forall_chain(const Formula& f, std::size_t frame);
  ad::NodeId atom(const Formula& f, std::size_t frame);
  ad::NodeId term(const Term& t, std::size_t frame);
  ad::NodeId fixed_atom(const std::string& pred, const std::vector<std::vector<std::size_t>>& rows);
  ad::NodeId table_predicate(const std::string& pred);
  const PredicateNodes& predicate(const std::string& pred, std::size_t arity);
  const FunctionNodes& function(const std::string& func, std::size_t arity);
  std::size_t constant_index(const std::string& c) const;
  std::size_t child_frame(std::size_t parent, const std::vector<std::string>& vars);
  const std::vector<std::size_t>& candidates(const std::string& var);
  bool compatible(const std::vector<std::size_t>& row, std::size_t c) const;
  std::vector<std::size_t> gather_rows(const Term& t, std::size_t frame) const;

  const GroundedTheory& theory_;
  ad::Graph& g_;
  std::vector<std::string> constants_;
  std::map<std::string, std::size_t> constant_index_;
  std::vector<std::string> group_;  // per constant index
  ad::NodeId table_ = kNoNode;      // [C, n]
  std::vector<Frame> frames_;
  std::map<std::pair<std::size_t, std::vector<std::string>>, std::size_t> frame_ids_;
  std::map<std::pair<std::size_t, std::string>, ad::NodeId> memo_;
  std::map<std::string, PredicateNodes> predicates_;
  std::map<std::string, FunctionNodes> functions_;
  std::map<std::string, ad::NodeId> table_predicates_;
  std::map<std::string, std::vector<std::size_t>> candidates_;
};

// G(f) under the theory's current grounding. Pure.
double evaluate(const Formula& f, const GroundedTheory& theory);

}  // namespace ltn
