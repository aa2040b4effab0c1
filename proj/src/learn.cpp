#include "ltn/learn.hpp"

#include <chrono>
#include <cmath>

#include "ltn/error.hpp"

namespace ltn {

Objective parse_objective(const std::string& name) {
  if (name == "conjunction") return Objective::Conjunction;
  if (name == "grouped") return Objective::Grouped;
  throw InvalidSpec("unknown objective '" + name + "' (expected conjunction or grouped)");
}

std::string to_string(Objective o) { return o == Objective::Conjunction ? "conjunction" : "grouped"; }

void TrainConfig::check() const {
  if (!(lambda >= 0)) throw InvalidSpec("lambda must be >= 0");
  if (!(learning_rate > 0)) throw InvalidSpec("learning rate must be > 0");
  if (!(decay >= 0 && decay < 1)) throw InvalidSpec("decay must lie in [0, 1)");
  if (!(epsilon > 0)) throw InvalidSpec("epsilon must be > 0");
}

Json TrainReport::to_json(const KnowledgeBase& kb) const {
  Json formulas = Json::array();
  for (std::size_t i = 0; i < kb.formulas.size(); ++i)
    formulas.push_back({{"formula", to_string(kb.formulas[i])},
                        {"truth", i < truths.size() ? truths[i] : 0.0}});
  return {{"epochs", trace.size()},
          {"trace", trace},
          {"final_satisfiability", final_satisfiability},
          {"formulas", formulas}};
}

double conjunction(TNorm t, const std::vector<double>& truths) {
  double acc = 1.0;
  for (std::size_t i = 0; i < truths.size(); ++i)
    acc = i == 0 ? truths[0] : apply_connective(t, Connective::And, acc, truths[i]);
  return acc;
}

namespace {

// A ground literal P(c1..cm) or not P(c1..cm) over constants only.
bool ground_literal(const Formula& f, bool& negated, const Formula*& atom) {
  negated = f.kind() == Formula::Kind::Not;
  atom = negated ? &f.lhs() : &f;
  if (!atom->is_atom()) return false;
  for (const auto& a : atom->args())
    if (a.kind() != Term::Kind::Constant) return false;
  return true;
}

}  // namespace

LossGraph::LossGraph(const GroundedTheory& t, double lambda, Objective objective) {
  t.check();
  ad::Graph& g = graph_;
  FormulaCompiler compiler(t, g);
  const auto& formulas = t.kb.formulas;
  slots_.resize(formulas.size());

  struct Group {
    std::string pred;
    bool negated;
    std::vector<std::size_t> members;
    std::vector<std::vector<std::string>> args;
  };
  std::vector<Group> groups;
  std::map<std::pair<std::string, bool>, std::size_t> group_index;
  std::vector<ad::NodeId> units;

  for (std::size_t i = 0; i < formulas.size(); ++i) {
    bool negated = false;
    const Formula* atom = nullptr;
    if (ground_literal(formulas[i], negated, atom)) {
      auto key = std::make_pair(atom->name(), negated);
      auto it = group_index.find(key);
      if (it == group_index.end()) {
        it = group_index.emplace(key, groups.size()).first;
        groups.push_back({atom->name(), negated, {}, {}});
      }
      Group& grp = groups[it->second];
      std::vector<std::string> tuple;
      for (const auto& a : atom->args()) tuple.push_back(a.name());
      grp.members.push_back(i);
      grp.args.push_back(std::move(tuple));
    } else {
      ad::NodeId n = compiler.compile(formulas[i]);
      slots_[i] = {n, 0};
      units.push_back(n);
    }
  }
  for (const auto& grp : groups) {
    ad::NodeId n = compiler.compile_literals(grp.pred, grp.args, grp.negated);
    for (std::size_t j = 0; j < grp.members.size(); ++j) slots_[grp.members[j]] = {n, j};
    units.push_back(aggregate_node(g, t.logic.aggregator, n, t.logic.eps,
                                   std::vector<std::size_t>(grp.members.size(), 0), 1));
  }

  if (formulas.empty()) {
    objective_ = g.scalar(1.0);
  } else if (objective == Objective::Grouped) {
    objective_ = aggregate_node(g, t.logic.aggregator, g.concat(units, -1), t.logic.eps);
  } else {
    ad::NodeId acc = kNoNode;
    for (const auto& s : slots_) {
      ad::NodeId v = g.node(s.node).shape == ad::Shape{1} ? s.node : g.gather(s.node, {s.offset});
      acc = acc == kNoNode ? v : connective_node(g, t.logic.tnorm, Connective::And, acc, v);
    }
    objective_ = acc;
  }

  // Parameters no formula touches still carry the penalty.
  std::set<std::string> present;
  for (ad::NodeId p : g.params()) present.insert(g.node(p).name);
  for (const auto& [key, value] : t.params)
    if (!present.count(key)) g.param(key, value.shape());

  ad::NodeId l = g.scale_shift(objective_, -1.0, 1.0);
  if (lambda > 0) {
    ad::NodeId reg = kNoNode;
    for (ad::NodeId p : std::vector<ad::NodeId>(g.params())) {
      ad::NodeId sq = g.sum(g.mul(p, p));
      reg = reg == kNoNode ? sq : g.add(reg, sq);
    }
    if (reg != kNoNode) l = g.add(l, g.scale_shift(reg, lambda, 0.0));
  }
  loss_ = l;
}

LossGraph::Result LossGraph::forward(const ad::ParamStore& params) const {
  Result r;
  r.values = ad::evaluate_forward(graph_, ad::bind_params(graph_, params));
  r.loss = r.values[loss_].item();
  r.objective = r.values[objective_].item();
  r.truths.reserve(slots_.size());
  for (const auto& s : slots_) r.truths.push_back(std::clamp(r.values[s.node][s.offset], 0.0, 1.0));
  return r;
}

ad::ParamStore LossGraph::gradients(const Result& r) const {
  ad::ParamStore out;
  for (auto& [id, grad] : ad::backward_gradients(graph_, loss_, r.values))
    out[graph_.node(id).name] = std::move(grad);
  return out;
}

std::vector<double> formula_truths(const GroundedTheory& t) {
  LossGraph lg(t, 0.0, Objective::Grouped);
  return lg.forward(t.params).truths;
}

double satisfiability(const GroundedTheory& t) {
  return conjunction(t.logic.tnorm, formula_truths(t));
}

double loss(const GroundedTheory& t, double lambda, Objective objective) {
  LossGraph lg(t, lambda, objective);
  return lg.forward(t.params).loss;
}

void rmsprop_step(ad::ParamStore& params, const ad::ParamStore& grads, RmsPropState& state,
                  const TrainConfig& cfg) {
  for (auto& [key, theta] : params) {
    auto git = grads.find(key);
    if (git == grads.end()) continue;
    const ad::Tensor& g = git->second;
    if (g.shape() != theta.shape())
      throw ShapeMismatch("gradient for '" + key + "' has shape " + ad::shape_string(g.shape()) +
                          ", parameter " + ad::shape_string(theta.shape()));
    ad::Tensor& s = state.mean_square[key];
    if (s.shape() != theta.shape()) s = ad::Tensor(theta.shape());
    for (std::size_t i = 0; i < theta.size(); ++i) {
      s[i] = cfg.decay * s[i] + (1.0 - cfg.decay) * g[i] * g[i];
      theta[i] -= cfg.learning_rate * g[i] / (std::sqrt(s[i]) + cfg.epsilon);
    }
  }
}

TrainReport train(GroundedTheory& t, const TrainConfig& cfg) {
  cfg.check();
  auto start = std::chrono::steady_clock::now();
  TrainReport rep;
  LossGraph lg(t, cfg.lambda, cfg.objective);
  if (cfg.epochs > 0 && t.params.empty()) throw InvalidSpec("theory has no learnable parameters");
  RmsPropState state;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    try {
      auto r = lg.forward(t.params);
      rep.trace.push_back(conjunction(t.logic.tnorm, r.truths));
      rmsprop_step(t.params, lg.gradients(r), state, cfg);
      for (const auto& [key, theta] : t.params)
        if (!theta.all_finite()) throw NonFiniteValue(0, "parameter '" + key + "' after update");
    } catch (const NonFiniteValue& err) {
      throw NonFiniteValue(err.node(), "epoch " + std::to_string(e) + ": " + err.what());
    }
  }
  auto r = lg.forward(t.params);
  rep.truths = r.truths;
  rep.final_satisfiability = conjunction(t.logic.tnorm, r.truths);
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

double query(const GroundedTheory& t, const Formula& f) { return evaluate(f, t); }

}  // namespace ltn
