#include "ltn/semantics.hpp"

#include <algorithm>
#include <cmath>

#include "ltn/error.hpp"

namespace ltn {

TNorm parse_tnorm(const std::string& name) {
  if (name == "lukasiewicz") return TNorm::Lukasiewicz;
  if (name == "product") return TNorm::Product;
  if (name == "goedel") return TNorm::Goedel;
  throw InvalidSpec("unknown t-norm '" + name + "' (expected lukasiewicz, product or goedel)");
}

std::string to_string(TNorm t) {
  switch (t) {
    case TNorm::Lukasiewicz: return "lukasiewicz";
    case TNorm::Product: return "product";
    case TNorm::Goedel: return "goedel";
  }
  return "?";
}

Aggregator Aggregator::mean(int p) {
  if (p == 0) throw InvalidSpec("mean_p needs p != 0");
  return {Kind::MeanP, p};
}

Aggregator Aggregator::parse(const std::string& spec) {
  if (spec == "min") return min();
  if (spec.rfind("mean:", 0) == 0) {
    std::string num = spec.substr(5);
    std::size_t used = 0;
    int p = 0;
    try {
      p = std::stoi(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != num.size()) throw InvalidSpec("bad aggregator exponent in '" + spec + "'");
    return mean(p);
  }
  throw InvalidSpec("unknown aggregator '" + spec + "' (expected mean:<p> or min)");
}

std::string Aggregator::str() const {
  return kind == Kind::Min ? "min" : "mean:" + std::to_string(p);
}

namespace {

double checked_truth(double x) {
  if (!(x >= -1e-12 && x <= 1.0 + 1e-12))
    throw OutOfRange("truth value " + std::to_string(x) + " outside [0, 1]");
  return std::clamp(x, 0.0, 1.0);
}

}  // namespace

double apply_connective(TNorm t, Connective c, double a, double b) {
  a = checked_truth(a);
  if (c == Connective::Not) return 1.0 - a;
  b = checked_truth(b);
  switch (t) {
    case TNorm::Lukasiewicz:
      switch (c) {
        case Connective::And: return std::max(0.0, a + b - 1.0);
        case Connective::Or: return std::min(1.0, a + b);
        default: return std::min(1.0, 1.0 - a + b);
      }
    case TNorm::Product:
      switch (c) {
        case Connective::And: return a * b;
        case Connective::Or: return a + b - a * b;
        default: return a <= b ? 1.0 : b / a;
      }
    case TNorm::Goedel:
      switch (c) {
        case Connective::And: return std::min(a, b);
        case Connective::Or: return std::max(a, b);
        default: return a <= b ? 1.0 : b;
      }
  }
  return 0.0;
}

double aggregate(const Aggregator& agg, const std::vector<double>& values, double eps) {
  if (values.empty()) throw EmptyDomain("aggregation over no values");
  if (agg.kind == Aggregator::Kind::Min) {
    double m = 1.0;
    for (double v : values) m = std::min(m, checked_truth(v));
    return m;
  }
  if (!(eps > 0 && eps <= 1e-3)) throw OutOfRange("aggregation eps must lie in (0, 1e-3]");
  double s = 0;
  for (double v : values) s += std::pow(std::clamp(checked_truth(v), eps, 1.0), agg.p);
  return std::pow(s / static_cast<double>(values.size()), 1.0 / agg.p);
}

ad::NodeId connective_node(ad::Graph& g, TNorm t, Connective c, ad::NodeId a, ad::NodeId b) {
  if (c == Connective::Not) return g.scale_shift(a, -1.0, 1.0);
  if (b == kNoNode) throw ShapeMismatch("binary connective with one operand");
  switch (t) {
    case TNorm::Lukasiewicz:
      switch (c) {
        case Connective::And:
          return g.max(g.scalar(0.0), g.scale_shift(g.add(a, b), 1.0, -1.0));
        case Connective::Or:
          return g.min(g.scalar(1.0), g.add(a, b));
        default:
          return g.min(g.scalar(1.0), g.add(g.scale_shift(a, -1.0, 1.0), b));
      }
    case TNorm::Product:
      switch (c) {
        case Connective::And: return g.mul(a, b);
        case Connective::Or: return g.add(g.add(a, b), g.neg(g.mul(a, b)));
        default: return g.residuum(a, b, ad::ResiduumFamily::Product);
      }
    case TNorm::Goedel:
      switch (c) {
        case Connective::And: return g.min(a, b);
        case Connective::Or: return g.max(a, b);
        default: return g.residuum(a, b, ad::ResiduumFamily::Goedel);
      }
  }
  return a;
}

ad::NodeId aggregate_node(ad::Graph& g, const Aggregator& agg, ad::NodeId values, double eps,
                          std::vector<std::size_t> segment_of, std::size_t segments) {
  if (agg.kind == Aggregator::Kind::Min)
    return segments ? g.segment_min(values, std::move(segment_of), segments) : g.reduce_min(values);
  if (!(eps > 0 && eps <= 1e-3)) throw OutOfRange("aggregation eps must lie in (0, 1e-3]");
  ad::NodeId powered = g.pow(g.clamp(values, eps, 1.0), agg.p);
  ad::NodeId m = segments ? g.segment_mean(powered, std::move(segment_of), segments) : g.mean(powered);
  return agg.p == 1 ? m : g.pow(m, 1.0 / agg.p);
}

// ---------------------------------------------------------------------------

void GroundedTheory::check() const {
  grounding.check();
  const Signature& sig = kb.signature;
  for (const auto& c : sig.constants) {
    bool fixed = fixed_constants.count(c) != 0;
    bool learnable = params.count(constant_key(c)) != 0;
    if (fixed && learnable)
      throw SymbolCollision("constant '" + c + "' is both fixed and learnable");
    if (!fixed && !learnable) throw UngroundedSymbol("constant '" + c + "' has no grounding");
  }
  for (const auto& [c, v] : fixed_constants)
    if (v.size() != grounding.n)
      throw ShapeMismatch("constant '" + c + "' has a vector of length " + std::to_string(v.size()) +
                          ", expected " + std::to_string(grounding.n));
  for (const auto& [f, arity] : sig.functions) {
    auto fg = function_grounding(params, f);
    if (fg.M.shape() != ad::Shape{grounding.n, arity * grounding.n})
      throw ShapeMismatch("function '" + f + "' grounding has shape " +
                          ad::shape_string(fg.M.shape()));
  }
  for (const auto& [p, arity] : sig.predicates) {
    bool fixed = fixed_predicates.count(p) != 0;
    bool learnable = params.count(predicate_key(p, "W")) != 0;
    if (fixed && learnable)
      throw SymbolCollision("predicate '" + p + "' is both fixed and learnable");
    if (!fixed && !learnable) throw UngroundedSymbol("predicate '" + p + "' has no grounding");
    if (learnable) {
      auto pg = predicate_grounding(params, p);
      std::size_t mn = arity * grounding.n;
      if (pg.W.shape() != ad::Shape{grounding.k, mn, mn})
        throw ShapeMismatch("predicate '" + p + "' grounding has shape " +
                            ad::shape_string(pg.W.shape()));
    }
  }
  auto diags = validate_kb(kb);
  if (!diags.empty()) {
    const auto& d = diags.front();
    std::string msg = "formula " + std::to_string(d.formula_index) + ": " + d.message;
    if (d.kind == "NotClosed") throw NotClosed(msg);
    if (d.kind == "ArityMismatch") throw ArityMismatch(msg);
    if (d.kind == "SymbolCollision") throw SymbolCollision(msg);
    throw UnknownSymbol(msg);
  }
  for (std::size_t i = 0; i < kb.formulas.size(); ++i)
    if (contains_exists(kb.formulas[i]))
      throw ExistsNotEliminated("formula " + std::to_string(i) + " still contains 'exists'");
}

// ---------------------------------------------------------------------------

FormulaCompiler::FormulaCompiler(const GroundedTheory& theory, ad::Graph& g)
    : theory_(theory), g_(g) {
  std::set<std::string> names;
  for (const auto& [c, v] : theory.fixed_constants) names.insert(c);
  const std::string prefix = "const/", suffix = "/vec";
  for (const auto& [key, t] : theory.params)
    if (key.size() > prefix.size() + suffix.size() && key.rfind(prefix, 0) == 0 &&
        key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0)
      names.insert(key.substr(prefix.size(), key.size() - prefix.size() - suffix.size()));
  constants_.assign(names.begin(), names.end());
  for (std::size_t i = 0; i < constants_.size(); ++i) {
    constant_index_[constants_[i]] = i;
    auto it = theory.domain.group_of.find(constants_[i]);
    group_.push_back(it == theory.domain.group_of.end() ? std::string() : it->second);
  }

  if (!constants_.empty()) {
    const std::size_t n = theory.grounding.n;
    std::vector<ad::NodeId> pieces;
    std::vector<double> run;
    auto flush = [&] {
      if (run.empty()) return;
      std::size_t rows = run.size() / n;
      pieces.push_back(g_.constant(ad::Tensor({rows, n}, std::move(run))));
      run.clear();
    };
    for (const auto& c : constants_) {
      auto it = theory.fixed_constants.find(c);
      if (it != theory.fixed_constants.end()) {
        if (it->second.size() != n)
          throw ShapeMismatch("constant '" + c + "' vector has length " +
                              std::to_string(it->second.size()) + ", expected " + std::to_string(n));
        run.insert(run.end(), it->second.begin(), it->second.end());
      } else {
        flush();
        pieces.push_back(g_.param(constant_key(c), {n}));
      }
    }
    flush();
    table_ = g_.concat(pieces, 0);
  }

  frames_.push_back(Frame{{}, {{}}, 0, {0}});
}

ad::Bindings FormulaCompiler::bindings() const { return ad::bind_params(g_, theory_.params); }

std::size_t FormulaCompiler::constant_index(const std::string& c) const {
  auto it = constant_index_.find(c);
  if (it == constant_index_.end()) throw UngroundedSymbol("constant '" + c + "' has no grounding");
  return it->second;
}

const std::vector<std::size_t>& FormulaCompiler::candidates(const std::string& var) {
  auto it = candidates_.find(var);
  if (it != candidates_.end()) return it->second;
  const Domain& d = theory_.domain;
  auto pv = d.per_variable.find(var);
  const std::vector<std::string>& names =
      pv != d.per_variable.end() ? pv->second : (d.constants.empty() ? constants_ : d.constants);
  std::vector<std::size_t> idx;
  for (const auto& c : names) idx.push_back(constant_index(c));
  return candidates_[var] = std::move(idx);
}

bool FormulaCompiler::compatible(const std::vector<std::size_t>& row, std::size_t c) const {
  if (!theory_.domain.group_of.empty() && !row.empty() && group_[row.front()] != group_[c])
    return false;
  if (theory_.domain.distinct && std::find(row.begin(), row.end(), c) != row.end()) return false;
  return true;
}

std::size_t FormulaCompiler::child_frame(std::size_t parent, const std::vector<std::string>& vars) {
  auto key = std::make_pair(parent, vars);
  auto it = frame_ids_.find(key);
  if (it != frame_ids_.end()) return it->second;

  Frame child;
  child.parent = parent;
  std::vector<std::size_t> keep;  // parent slots that stay visible
  for (std::size_t i = 0; i < frames_[parent].vars.size(); ++i)
    if (std::find(vars.begin(), vars.end(), frames_[parent].vars[i]) == vars.end()) {
      keep.push_back(i);
      child.vars.push_back(frames_[parent].vars[i]);
    }
  // A variable repeated within the chain is bound by its innermost occurrence.
  std::vector<std::string> chain;
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (std::find(vars.begin() + static_cast<long>(i) + 1, vars.end(), vars[i]) == vars.end())
      chain.push_back(vars[i]);
  for (const auto& v : chain) child.vars.push_back(v);

  std::vector<const std::vector<std::size_t>*> cands;
  for (const auto& v : chain) cands.push_back(&candidates(v));

  const Frame& pf = frames_[parent];
  for (std::size_t pr = 0; pr < pf.rows.size(); ++pr) {
    std::vector<std::size_t> row;
    for (auto i : keep) row.push_back(pf.rows[pr][i]);
    std::size_t before = child.rows.size();
    std::function<void(std::size_t)> extend = [&](std::size_t depth) {
      if (depth == chain.size()) {
        child.rows.push_back(row);
        child.parent_row.push_back(pr);
        return;
      }
      for (std::size_t c : *cands[depth]) {
        if (!compatible(row, c)) continue;
        row.push_back(c);
        extend(depth + 1);
        row.pop_back();
      }
    };
    extend(0);
    if (child.rows.size() == before) {
      std::string names;
      for (const auto& v : chain) names += (names.empty() ? "" : ", ") + v;
      throw EmptyDomain("no admissible binding for " + names);
    }
  }
  frames_.push_back(std::move(child));
  return frame_ids_[key] = frames_.size() - 1;
}

std::vector<std::size_t> FormulaCompiler::gather_rows(const Term& t, std::size_t frame) const {
  const Frame& f = frames_[frame];
  if (t.kind() == Term::Kind::Constant)
    return std::vector<std::size_t>(f.rows.size(), constant_index(t.name()));
  auto pos = std::find(f.vars.begin(), f.vars.end(), t.name());
  if (pos == f.vars.end()) throw NotClosed("variable '" + t.name() + "' is not bound");
  std::size_t slot = static_cast<std::size_t>(pos - f.vars.begin());
  std::vector<std::size_t> out;
  out.reserve(f.rows.size());
  for (const auto& r : f.rows) out.push_back(r[slot]);
  return out;
}

const PredicateNodes& FormulaCompiler::predicate(const std::string& pred, std::size_t arity) {
  auto it = predicates_.find(pred);
  if (it != predicates_.end()) return it->second;
  if (!theory_.params.count(predicate_key(pred, "W")))
    throw UngroundedSymbol("predicate '" + pred + "' has no grounding");
  return predicates_[pred] = declare_predicate(g_, pred, arity, theory_.grounding);
}

const FunctionNodes& FormulaCompiler::function(const std::string& func, std::size_t arity) {
  auto it = functions_.find(func);
  if (it != functions_.end()) return it->second;
  if (!theory_.params.count(function_key(func, "M")))
    throw UngroundedSymbol("function '" + func + "' has no grounding");
  return functions_[func] = declare_function(g_, func, arity, theory_.grounding);
}

ad::NodeId FormulaCompiler::table_predicate(const std::string& pred) {
  auto it = table_predicates_.find(pred);
  if (it != table_predicates_.end()) return it->second;
  if (table_ == kNoNode) throw UngroundedSymbol("no grounded constants");
  return table_predicates_[pred] = predicate_node(g_, predicate(pred, 1), table_);
}

ad::NodeId FormulaCompiler::fixed_atom(const std::string& pred,
                                       const std::vector<std::vector<std::size_t>>& arg_rows) {
  const FixedPredicate& fn = theory_.fixed_predicates.at(pred);
  std::size_t rows = arg_rows.front().size();
  std::vector<double> out(rows);
  std::vector<Vec> args(arg_rows.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < arg_rows.size(); ++j) {
      const std::string& c = constants_[arg_rows[j][r]];
      auto it = theory_.fixed_constants.find(c);
      if (it == theory_.fixed_constants.end())
        throw UngroundedSymbol("rule-based predicate '" + pred + "' needs a fixed grounding for '" +
                               c + "'");
      args[j] = it->second;
    }
    out[r] = checked_truth(fn(args));
  }
  return g_.constant(ad::Tensor::vector(std::move(out)));
}

ad::NodeId FormulaCompiler::term(const Term& t, std::size_t frame) {
  auto key = std::make_pair(frame, "t:" + to_string(t));
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  ad::NodeId out;
  if (t.kind() == Term::Kind::Function) {
    std::vector<ad::NodeId> parts;
    for (const auto& a : t.args()) parts.push_back(term(a, frame));
    out = function_node(g_, function(t.name(), t.args().size()), g_.concat(parts, -1));
  } else {
    if (table_ == kNoNode) throw UngroundedSymbol("no grounded constants");
    out = g_.gather(table_, gather_rows(t, frame));
  }
  return memo_[key] = out;
}

ad::NodeId FormulaCompiler::atom(const Formula& f, std::size_t frame) {
  const std::string& pred = f.name();
  bool simple_args = std::all_of(f.args().begin(), f.args().end(), [](const Term& t) {
    return t.kind() != Term::Kind::Function;
  });
  if (theory_.fixed_predicates.count(pred)) {
    if (!simple_args)
      throw UngroundedSymbol("rule-based predicate '" + pred + "' applied to a function term");
    std::vector<std::vector<std::size_t>> rows;
    for (const auto& a : f.args()) rows.push_back(gather_rows(a, frame));
    return fixed_atom(pred, rows);
  }
  if (f.args().size() == 1 && simple_args)
    return g_.gather(table_predicate(pred), gather_rows(f.args()[0], frame));
  std::vector<ad::NodeId> parts;
  for (const auto& a : f.args()) parts.push_back(term(a, frame));
  ad::NodeId v = parts.size() == 1 ? parts[0] : g_.concat(parts, -1);
  return predicate_node(g_, predicate(pred, f.args().size()), v);
}

ad::NodeId FormulaCompiler::forall_chain(const Formula& f, std::size_t frame) {
  std::vector<std::string> vars;
  const Formula* body = &f;
  while (body->kind() == Formula::Kind::Forall) {
    vars.push_back(body->name());
    body = &body->body();
  }
  std::size_t child = child_frame(frame, vars);
  ad::NodeId truths = formula(*body, child);
  return aggregate_node(g_, theory_.logic.aggregator, truths, theory_.logic.eps,
                        frames_[child].parent_row, frames_[frame].rows.size());
}

ad::NodeId FormulaCompiler::formula(const Formula& f, std::size_t frame) {
  auto key = std::make_pair(frame, to_string(f));
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  using K = Formula::Kind;
  TNorm t = theory_.logic.tnorm;
  ad::NodeId out = kNoNode;
  switch (f.kind()) {
    case K::Atom:
      out = atom(f, frame);
      break;
    case K::Not:
      out = connective_node(g_, t, Connective::Not, formula(f.lhs(), frame));
      break;
    case K::And:
    case K::Or:
    case K::Implies: {
      Connective c = f.kind() == K::And ? Connective::And
                     : f.kind() == K::Or ? Connective::Or
                                         : Connective::Implies;
      ad::NodeId a = formula(f.lhs(), frame);
      ad::NodeId b = formula(f.rhs(), frame);
      out = connective_node(g_, t, c, a, b);
      break;
    }
    case K::Forall:
      out = forall_chain(f, frame);
      break;
    case K::Exists:
      throw ExistsNotEliminated("Skolemize before compiling: " + to_string(f));
  }
  return memo_[key] = out;
}

ad::NodeId FormulaCompiler::compile(const Formula& f) {
  auto fv = free_variables(f);
  if (!fv.empty()) throw NotClosed("cannot compile open formula " + to_string(f));
  return formula(f, 0);
}

ad::NodeId FormulaCompiler::compile_literals(const std::string& pred,
                                             const std::vector<std::vector<std::string>>& args,
                                             bool negated) {
  if (args.empty()) throw EmptyDomain("no literals to compile");
  std::size_t arity = args.front().size();
  std::vector<std::vector<std::size_t>> cols(arity);
  for (const auto& tuple : args) {
    if (tuple.size() != arity) throw ArityMismatch("literal tuples of different lengths");
    for (std::size_t j = 0; j < arity; ++j) cols[j].push_back(constant_index(tuple[j]));
  }
  ad::NodeId out;
  if (theory_.fixed_predicates.count(pred)) {
    out = fixed_atom(pred, cols);
  } else if (arity == 1) {
    out = g_.gather(table_predicate(pred), cols[0]);
  } else {
    std::vector<ad::NodeId> parts;
    for (auto& c : cols) parts.push_back(g_.gather(table_, std::move(c)));
    out = predicate_node(g_, predicate(pred, arity), g_.concat(parts, -1));
  }
  return negated ? connective_node(g_, theory_.logic.tnorm, Connective::Not, out) : out;
}

double evaluate(const Formula& f, const GroundedTheory& theory) {
  ad::Graph g;
  FormulaCompiler c(theory, g);
  ad::NodeId out = c.compile(f);
  auto values = ad::evaluate_forward(g, c.bindings());
  return std::clamp(values[out][0], 0.0, 1.0);
}

}  // namespace ltn
