#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ltn/error.hpp"
#include "ltn/parser.hpp"
#include "ltn/semantics.hpp"

using namespace ltn;

namespace {

// A theory whose constants b0..b{d-1} carry their index as a 1-vector and
// whose predicates P, Q (unary) and R (binary) read fixed truth tables.
struct TableTheory {
  std::vector<double> P, Q;
  std::vector<std::vector<double>> R;
  GroundedTheory theory;

  TableTheory(std::size_t d, std::mt19937_64& rng, LogicConfig logic = {}) {
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t i = 0; i < d; ++i) {
      P.push_back(u(rng));
      Q.push_back(u(rng));
      R.emplace_back();
      for (std::size_t j = 0; j < d; ++j) R.back().push_back(u(rng));
    }
    theory.grounding = GroundingConfig{1, 1};
    theory.logic = logic;
    for (std::size_t i = 0; i < d; ++i) {
      std::string c = "b" + std::to_string(i);
      theory.kb.signature.add_constant(c);
      theory.fixed_constants[c] = {static_cast<double>(i)};
    }
    theory.kb.signature.add_predicate("P", 1);
    theory.kb.signature.add_predicate("Q", 1);
    theory.kb.signature.add_predicate("R", 2);
    auto idx = [](const Vec& v) { return static_cast<std::size_t>(v[0]); };
    theory.fixed_predicates["P"] = [this, idx](const std::vector<Vec>& a) { return P[idx(a[0])]; };
    theory.fixed_predicates["Q"] = [this, idx](const std::vector<Vec>& a) { return Q[idx(a[0])]; };
    theory.fixed_predicates["R"] = [this, idx](const std::vector<Vec>& a) {
      return R[idx(a[0])][idx(a[1])];
    };
  }
  TableTheory(const TableTheory&) = delete;

  double eval(const std::string& text) {
    return evaluate(parse_formula(text, theory.kb.signature), theory);
  }
};

// Independent reference semantics: Lukasiewicz connectives, mean_p over the
// joint tuples of each run of nested universal quantifiers.
struct Reference {
  const TableTheory& t;
  int p;
  double eps = 1e-6;

  double term_index(const Term& x, const std::map<std::string, std::size_t>& env) const {
    if (x.kind() == Term::Kind::Variable) return static_cast<double>(env.at(x.name()));
    return std::stod(x.name().substr(1));
  }

  double eval(const Formula& f, std::map<std::string, std::size_t>& env) const {
    using K = Formula::Kind;
    switch (f.kind()) {
      case K::Atom: {
        auto i = static_cast<std::size_t>(term_index(f.args()[0], env));
        if (f.name() == "P") return t.P[i];
        if (f.name() == "Q") return t.Q[i];
        return t.R[i][static_cast<std::size_t>(term_index(f.args()[1], env))];
      }
      case K::Not: return 1 - eval(f.lhs(), env);
      case K::And: return std::max(0.0, eval(f.lhs(), env) + eval(f.rhs(), env) - 1);
      case K::Or: return std::min(1.0, eval(f.lhs(), env) + eval(f.rhs(), env));
      case K::Implies: return std::min(1.0, 1 - eval(f.lhs(), env) + eval(f.rhs(), env));
      default: break;
    }
    std::vector<std::string> vars;
    const Formula* body = &f;
    while (body->kind() == K::Forall) {
      vars.push_back(body->name());
      body = &body->body();
    }
    auto saved = env;
    double sum = 0;
    std::size_t count = 0;
    std::size_t d = t.P.size();
    std::vector<std::size_t> idx(vars.size(), 0);
    for (;;) {
      for (std::size_t i = 0; i < vars.size(); ++i) env[vars[i]] = idx[i];
      sum += std::pow(std::clamp(eval(*body, env), eps, 1.0), p);
      ++count;
      std::size_t k = 0;
      for (; k < idx.size(); ++k) {
        if (++idx[k] < d) break;
        idx[k] = 0;
      }
      if (k == idx.size()) break;
    }
    env = saved;
    return std::pow(sum / static_cast<double>(count), 1.0 / p);
  }
};

std::string random_text(std::mt19937_64& rng, int depth, std::vector<std::string>& vars,
                        std::size_t d) {
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  auto term = [&]() -> std::string {
    if (!vars.empty() && pick(4) != 0) return vars[pick(vars.size())];
    return "b" + std::to_string(pick(d));
  };
  if (depth == 0 || pick(5) == 0) {
    switch (pick(3)) {
      case 0: return "P(" + term() + ")";
      case 1: return "Q(" + term() + ")";
      default: {
        std::string a = term();
        return "R(" + a + ", " + term() + ")";
      }
    }
  }
  switch (pick(6)) {
    case 0: return "not " + random_text(rng, depth - 1, vars, d);
    case 1: return "(" + random_text(rng, depth - 1, vars, d) + " and " + random_text(rng, depth - 1, vars, d) + ")";
    case 2: return "(" + random_text(rng, depth - 1, vars, d) + " or " + random_text(rng, depth - 1, vars, d) + ")";
    case 3: return "(" + random_text(rng, depth - 1, vars, d) + " -> " + random_text(rng, depth - 1, vars, d) + ")";
    default: {
      std::string v = "v" + std::to_string(vars.size());
      vars.push_back(v);
      std::string body = random_text(rng, depth - 1, vars, d);
      vars.pop_back();
      return "forall " + v + " (" + body + ")";
    }
  }
}

}  // namespace

TEST(Connectives, LukasiewiczArithmetic) {
  auto L = TNorm::Lukasiewicz;
  EXPECT_NEAR(apply_connective(L, Connective::And, 0.7, 0.6), 0.3, 1e-15);
  EXPECT_EQ(apply_connective(L, Connective::Or, 0.7, 0.6), 1.0);
  EXPECT_EQ(apply_connective(L, Connective::Not, 0.25), 0.75);
  EXPECT_NEAR(apply_connective(L, Connective::Implies, 0.3, 0.1), 0.8, 1e-15);
}

TEST(Connectives, ProductAndGoedel) {
  EXPECT_DOUBLE_EQ(apply_connective(TNorm::Product, Connective::And, 0.5, 0.4), 0.2);
  EXPECT_DOUBLE_EQ(apply_connective(TNorm::Product, Connective::Or, 0.5, 0.4), 0.7);
  EXPECT_DOUBLE_EQ(apply_connective(TNorm::Product, Connective::Implies, 0.5, 0.4), 0.8);
  EXPECT_DOUBLE_EQ(apply_connective(TNorm::Goedel, Connective::And, 0.5, 0.4), 0.4);
  EXPECT_DOUBLE_EQ(apply_connective(TNorm::Goedel, Connective::Or, 0.5, 0.4), 0.5);
  EXPECT_DOUBLE_EQ(apply_connective(TNorm::Goedel, Connective::Implies, 0.5, 0.4), 0.4);
  EXPECT_DOUBLE_EQ(apply_connective(TNorm::Goedel, Connective::Implies, 0.3, 0.4), 1.0);
}

TEST(Connectives, CrispTruthTables) {
  for (TNorm t : {TNorm::Lukasiewicz, TNorm::Product, TNorm::Goedel})
    for (int a = 0; a <= 1; ++a) {
      EXPECT_EQ(apply_connective(t, Connective::Not, a), double(!a));
      for (int b = 0; b <= 1; ++b) {
        EXPECT_EQ(apply_connective(t, Connective::And, a, b), double(a && b));
        EXPECT_EQ(apply_connective(t, Connective::Or, a, b), double(a || b));
        EXPECT_EQ(apply_connective(t, Connective::Implies, a, b), double(!a || b));
      }
    }
}

TEST(Connectives, RangeChecked) {
  EXPECT_THROW(apply_connective(TNorm::Lukasiewicz, Connective::And, 1.1, 0.5), OutOfRange);
  EXPECT_THROW(apply_connective(TNorm::Product, Connective::Not, -0.01), OutOfRange);
  EXPECT_NO_THROW(apply_connective(TNorm::Goedel, Connective::Or, 1.0 + 1e-13, 0.0));
}

TEST(Connectives, GraphMatchesScalar) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (TNorm t : {TNorm::Lukasiewicz, TNorm::Product, TNorm::Goedel})
    for (Connective c : {Connective::Not, Connective::And, Connective::Or, Connective::Implies}) {
      ad::Graph g;
      auto a = g.input("a", {50});
      auto b = g.input("b", {50});
      auto out = connective_node(g, t, c, a, b);
      ad::Tensor ta({50}), tb({50});
      for (std::size_t i = 0; i < 50; ++i) {
        ta[i] = u(rng);
        tb[i] = i % 5 == 0 ? ta[i] : u(rng);
      }
      auto v = ad::evaluate_forward(g, {{a, ta}, {b, tb}});
      for (std::size_t i = 0; i < 50; ++i)
        EXPECT_DOUBLE_EQ(v[out][i], apply_connective(t, c, ta[i], tb[i]));
    }
}

TEST(Aggregate, Examples) {
  EXPECT_NEAR(aggregate(Aggregator::mean(1), {0.2, 0.4, 0.6}), 0.4, 1e-15);
  EXPECT_NEAR(aggregate(Aggregator::mean(-1), {0.5, 1.0}), 2.0 / 3.0, 1e-12);
  double want = 1.0 / (0.5 * (1e6 + 1.0));
  EXPECT_NEAR(aggregate(Aggregator::mean(-1), {0.0, 1.0}, 1e-6), want, 1e-15);
  EXPECT_EQ(aggregate(Aggregator::min(), {0.3, 0.1, 0.9}), 0.1);
  EXPECT_THROW(aggregate(Aggregator::mean(2), {}), EmptyDomain);
  EXPECT_THROW(Aggregator::mean(0), InvalidSpec);
}

TEST(Aggregate, Parsing) {
  EXPECT_EQ(Aggregator::parse("mean:-1").p, -1);
  EXPECT_EQ(Aggregator::parse("min").kind, Aggregator::Kind::Min);
  EXPECT_EQ(Aggregator::parse("mean:3").str(), "mean:3");
  EXPECT_THROW(Aggregator::parse("mean:x"), InvalidSpec);
  EXPECT_THROW(Aggregator::parse("max"), InvalidSpec);
  EXPECT_EQ(parse_tnorm("goedel"), TNorm::Goedel);
  EXPECT_THROW(parse_tnorm("zadeh"), InvalidSpec);
}

TEST(Aggregate, GraphMatchesScalar) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int p : {-3, -1, 1, 2, 3}) {
    ad::Graph g;
    auto x = g.input("x", {7});
    auto whole = aggregate_node(g, Aggregator::mean(p), x, 1e-6);
    auto seg = aggregate_node(g, Aggregator::mean(p), x, 1e-6, {0, 0, 1, 1, 1, 0, 1}, 2);
    ad::Tensor t({7});
    for (auto& v : t.storage()) v = u(rng);
    t[3] = 0.0;
    auto v = ad::evaluate_forward(g, {{x, t}});
    EXPECT_NEAR(v[whole].item(), aggregate(Aggregator::mean(p), t.storage()), 1e-14);
    EXPECT_NEAR(v[seg][0], aggregate(Aggregator::mean(p), {t[0], t[1], t[5]}), 1e-14);
    EXPECT_NEAR(v[seg][1], aggregate(Aggregator::mean(p), {t[2], t[3], t[4], t[6]}), 1e-14);
  }
}

TEST(Properties, MeanPBoundsIdempotenceMonotonicity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-6, 1);
  for (int p : {-3, -1, 1, 2, 3}) {
    auto agg = Aggregator::mean(p);
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<double> xs(1 + rng() % 8);
      for (auto& x : xs) x = u(rng);
      double m = aggregate(agg, xs);
      EXPECT_LE(*std::min_element(xs.begin(), xs.end()), m + 1e-12);
      EXPECT_LE(m, *std::max_element(xs.begin(), xs.end()) + 1e-12);
      double c = xs[0];
      EXPECT_NEAR(aggregate(agg, std::vector<double>(xs.size(), c)), c, 1e-12);
      auto ys = xs;
      std::size_t i = rng() % ys.size();
      ys[i] = std::min(1.0, ys[i] + u(rng) * (1 - ys[i]));
      EXPECT_LE(m, aggregate(agg, ys) + 1e-12);
    }
  }
}

TEST(Properties, MeanPOrdering) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(1e-6, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> xs(1 + rng() % 10);
    for (auto& x : xs) x = u(rng);
    double h = aggregate(Aggregator::mean(-1), xs);
    double a = aggregate(Aggregator::mean(1), xs);
    double q = aggregate(Aggregator::mean(2), xs);
    EXPECT_LE(h, a + 1e-12);
    EXPECT_LE(a, q + 1e-12);
  }
}

TEST(Compile, AtomIsOnePredicateApplication) {
  GroundedTheory t;
  t.grounding = GroundingConfig{2, 3};
  t.kb.signature.add_constant("b1");
  t.kb.signature.add_predicate("Cat", 1);
  t.fixed_constants["b1"] = {0.3, -0.2};
  t.params = init_parameters(t.grounding, t.kb.signature, 4);
  ad::Graph g;
  FormulaCompiler c(t, g);
  auto out = c.compile(parse_formula("Cat(b1)", t.kb.signature));
  auto v = ad::evaluate_forward(g, c.bindings());
  EXPECT_EQ(v[out].shape(), ad::Shape{1});
  EXPECT_NEAR(v[out][0], apply_predicate(predicate_grounding(t.params, "Cat"), {{0.3, -0.2}}), 1e-15);
  std::size_t sigmoids = 0;
  for (std::size_t i = 0; i < g.size(); ++i) sigmoids += g.node(i).op == ad::Op::Sigmoid;
  EXPECT_EQ(sigmoids, 1u);
}

TEST(Compile, HarmonicForall) {
  std::mt19937_64 rng(0);
  TableTheory tt(2, rng);
  tt.P = {0.9, 0.7};
  EXPECT_NEAR(tt.eval("forall x (P(x))"), 2.0 / (1 / 0.9 + 1 / 0.7), 1e-12);
  EXPECT_NEAR(tt.eval("forall x (P(x))"), 0.7875, 1e-12);
}

TEST(Compile, PairQuantifierIncludesDiagonal) {
  std::mt19937_64 rng(0);
  TableTheory tt(2, rng);
  tt.R = {{0.9, 0.2}, {0.6, 0.3}};
  double expect = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) expect += 1 / std::min(1.0, 1 - tt.R[i][j] + 1 - tt.R[j][i]);
  expect = 4 / expect;
  EXPECT_NEAR(tt.eval("forall x y (R(x, y) -> not R(y, x))"), expect, 1e-12);

  tt.theory.domain.distinct = true;
  double off = 2 / (2 / std::min(1.0, 2 - 0.2 - 0.6));
  EXPECT_NEAR(tt.eval("forall x y (R(x, y) -> not R(y, x))"), off, 1e-12);
}

TEST(Compile, GroupingRestrictsTuples) {
  std::mt19937_64 rng(5);
  TableTheory tt(4, rng, LogicConfig{TNorm::Lukasiewicz, Aggregator::mean(1)});
  tt.theory.domain.group_of = {{"b0", "i"}, {"b1", "i"}, {"b2", "j"}, {"b3", "j"}};
  double s = 0;
  int n = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i / 2 == j / 2) {
        s += tt.R[i][j];
        ++n;
      }
  EXPECT_NEAR(tt.eval("forall x y (R(x, y))"), s / n, 1e-12);
  // A single variable still ranges over everything.
  EXPECT_NEAR(tt.eval("forall x (P(x))"), (tt.P[0] + tt.P[1] + tt.P[2] + tt.P[3]) / 4, 1e-12);
}

TEST(Compile, Errors) {
  std::mt19937_64 rng(6);
  TableTheory tt(2, rng);
  const auto& sig = tt.theory.kb.signature;
  EXPECT_THROW(evaluate(parse_formula("exists x (P(x))", sig), tt.theory), ExistsNotEliminated);
  EXPECT_THROW(evaluate(parse_formula("P(x)", sig, {.allow_free_variables = true}), tt.theory),
               NotClosed);
  tt.theory.fixed_predicates.erase("Q");
  EXPECT_THROW(evaluate(parse_formula("Q(b0)", sig), tt.theory), UngroundedSymbol);
  tt.theory.domain.constants = {"b0", "b9"};
  EXPECT_THROW(evaluate(parse_formula("forall x (P(x))", sig), tt.theory), UngroundedSymbol);
  tt.theory.domain.constants = {"b0"};
  tt.theory.domain.distinct = true;
  EXPECT_THROW(evaluate(parse_formula("forall x y (R(x, y))", sig), tt.theory), EmptyDomain);
}

TEST(Evaluate, RuleBasedFacts) {
  std::mt19937_64 rng(7);
  TableTheory tt(2, rng);
  tt.P = {1.0, 0.0};
  EXPECT_EQ(tt.eval("P(b0)"), 1.0);
  EXPECT_EQ(tt.eval("not P(b0)"), 0.0);
  EXPECT_EQ(tt.eval("forall x (Q(x) -> Q(x))"), 1.0);
}

TEST(Properties, DeMorganUnderLukasiewicz) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 1000; ++i) {
    TableTheory tt(1, rng);
    double lhs = tt.eval("not (P(b0) and Q(b0))");
    double rhs = tt.eval("not P(b0) or not Q(b0)");
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Properties, ArithmeticMeanMakesForallEqualExists) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    TableTheory tt(3, rng, LogicConfig{TNorm::Lukasiewicz, Aggregator::mean(1)});
    EXPECT_NEAR(tt.eval("forall x (P(x))"), tt.eval("not forall x (not P(x))"), 1e-12);
    tt.theory.logic.aggregator = Aggregator::min();
    double all = tt.eval("forall x (P(x))"), some = tt.eval("not forall x (not P(x))");
    EXPECT_EQ(all, *std::min_element(tt.P.begin(), tt.P.end()));
    EXPECT_NEAR(some, *std::max_element(tt.P.begin(), tt.P.end()), 1e-15);
  }
}

TEST(Properties, QuantifierExpansionMatchesBruteForce) {
  std::mt19937_64 rng(10);
  for (int p : {-1, 1, 2}) {
    for (int trial = 0; trial < 150; ++trial) {
      std::size_t d = 1 + rng() % 3;
      TableTheory tt(d, rng, LogicConfig{TNorm::Lukasiewicz, Aggregator::mean(p)});
      std::vector<std::string> vars;
      std::string text = random_text(rng, 5, vars, d);
      Formula f = parse_formula(text, tt.theory.kb.signature);
      Reference ref{tt, p};
      std::map<std::string, std::size_t> env;
      EXPECT_NEAR(evaluate(f, tt.theory), ref.eval(f, env), 1e-12) << text;
    }
  }
}
