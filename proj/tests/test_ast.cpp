#include <gtest/gtest.h>

#include <random>

#include "ltn/error.hpp"
#include "ltn/parser.hpp"
#include "ltn/skolem.hpp"
#include "support/crisp_oracle.hpp"

using namespace ltn;

namespace {

Signature cat_signature() {
  Signature s;
  s.add_constant("b1");
  s.add_constant("b2");
  s.add_predicate("Cat", 1);
  s.add_predicate("Tail", 1);
  s.add_predicate("partOf", 2);
  s.add_function("f", 1);
  return s;
}

Term v(const char* n) { return Term::variable(n); }
Term c(const char* n) { return Term::constant(n); }

// Random closed formula over cat_signature().
Formula random_formula(std::mt19937_64& rng, int depth, std::vector<std::string>& vars) {
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
  auto term = [&](auto&& self, int d) -> Term {
    int choice = pick(vars.empty() ? 2 : 3);
    if (choice == 0 || (choice == 2 && d == 0)) return Term::constant(pick(2) ? "b1" : "b2");
    if (choice == 1 && !vars.empty()) return Term::variable(vars[pick(vars.size())]);
    if (choice == 1) return Term::constant("b1");
    return Term::function("f", {self(self, d - 1)});
  };
  if (depth <= 1 || pick(4) == 0) {
    if (pick(2)) return Formula::atom("Cat", {term(term, 2)});
    return Formula::atom("partOf", {term(term, 2), term(term, 2)});
  }
  switch (pick(6)) {
    case 0:
      return Formula::negation(random_formula(rng, depth - 1, vars));
    case 1:
    case 2:
    case 3: {
      auto kind = pick(3) == 0 ? Formula::Kind::And
                               : (pick(2) ? Formula::Kind::Or : Formula::Kind::Implies);
      Formula a = random_formula(rng, depth - 1, vars);
      Formula b = random_formula(rng, depth - 1, vars);
      return Formula::binary(kind, a, b);
    }
    default: {
      std::string name = pick(3) == 0 && !vars.empty() ? vars[0] : "v" + std::to_string(pick(4));
      vars.push_back(name);
      Formula body = random_formula(rng, depth - 1, vars);
      vars.pop_back();
      return pick(2) ? Formula::forall(name, body) : Formula::exists(name, body);
    }
  }
}

}  // namespace

TEST(Parse, GroundAtom) {
  auto sig = cat_signature();
  EXPECT_EQ(parse_formula("Cat(b1)", sig), Formula::atom("Cat", {c("b1")}));
}

TEST(Parse, EveryCatHasATail) {
  auto sig = cat_signature();
  Formula got = parse_formula("forall x (Cat(x) -> exists y (partOf(x,y) and Tail(y)))", sig);
  Formula want = Formula::forall(
      "x", Formula::implication(
               Formula::atom("Cat", {v("x")}),
               Formula::exists("y", Formula::conjunction(Formula::atom("partOf", {v("x"), v("y")}),
                                                         Formula::atom("Tail", {v("y")})))));
  EXPECT_EQ(got, want);
}

TEST(Parse, TruncatedInputReportsEndPosition) {
  auto sig = cat_signature();
  try {
    parse_formula("Cat(b1) and", sig);
    FAIL() << "expected SyntaxError";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.position(), 11u);
    EXPECT_NE(std::string(e.what()).find("end of input"), std::string::npos);
  }
}

TEST(Parse, Precedence) {
  auto sig = cat_signature();
  Formula a = Formula::atom("Cat", {c("b1")});
  Formula b = Formula::atom("Tail", {c("b1")});
  Formula d = Formula::atom("Cat", {c("b2")});
  EXPECT_EQ(parse_formula("not Cat(b1) and Tail(b1)", sig),
            Formula::conjunction(Formula::negation(a), b));
  EXPECT_EQ(parse_formula("Cat(b1) or Tail(b1) and Cat(b2)", sig),
            Formula::disjunction(a, Formula::conjunction(b, d)));
  EXPECT_EQ(parse_formula("Cat(b1) -> Tail(b1) -> Cat(b2)", sig),
            Formula::implication(a, Formula::implication(b, d)));
  EXPECT_EQ(parse_formula("(Cat(b1) -> Tail(b1)) -> Cat(b2)", sig),
            Formula::implication(Formula::implication(a, b), d));
  EXPECT_EQ(parse_formula("Cat(b1) and Tail(b1) or Cat(b2) -> Cat(b1)", sig),
            Formula::implication(Formula::disjunction(Formula::conjunction(a, b), d), a));
}

TEST(Parse, MultiVariableQuantifierIsNested) {
  auto sig = cat_signature();
  EXPECT_EQ(parse_formula("forall x y (partOf(x, y))  # comment", sig),
            Formula::forall("x", Formula::forall("y", Formula::atom("partOf", {v("x"), v("y")}))));
}

TEST(Parse, Errors) {
  auto sig = cat_signature();
  EXPECT_THROW(parse_formula("Dog(b1)", sig), UnknownSymbol);
  EXPECT_THROW(parse_formula("Cat(b9)", sig), UnknownSymbol);
  EXPECT_THROW(parse_formula("partOf(b1)", sig), ArityMismatch);
  EXPECT_THROW(parse_formula("Cat(f(b1, b2))", sig), ArityMismatch);
  EXPECT_THROW(parse_formula("forall b1 (Cat(b1))", sig), SyntaxError);
  EXPECT_THROW(parse_formula("Cat(b1) $", sig), SyntaxError);
  EXPECT_THROW(parse_formula("forall x Cat(x)", sig), SyntaxError);
  EXPECT_EQ(parse_formula("Cat(x)", sig, {.allow_free_variables = true}),
            Formula::atom("Cat", {v("x")}));
}

TEST(FreeVariables, Examples) {
  EXPECT_TRUE(free_variables(Formula::atom("Cat", {c("b1")})).empty());
  EXPECT_EQ(free_variables(Formula::atom("partOf", {v("x"), v("y")})),
            (std::set<std::string>{"x", "y"}));
  EXPECT_EQ(free_variables(Formula::forall("x", Formula::atom("partOf", {v("x"), v("y")}))),
            (std::set<std::string>{"y"}));
}

TEST(Skolemize, ExistsUnderForallBecomesFunction) {
  auto sig = cat_signature();
  Formula f = parse_formula("forall x (Cat(x) -> exists y (partOf(x,y) and Tail(y)))", sig);
  auto r = skolemize(f, sig);
  Term sk = Term::function("sk1", {v("x")});
  Formula want = Formula::forall(
      "x", Formula::implication(Formula::atom("Cat", {v("x")}),
                                Formula::conjunction(Formula::atom("partOf", {v("x"), sk}),
                                                     Formula::atom("Tail", {sk}))));
  EXPECT_EQ(r.formula, want);
  EXPECT_EQ(r.signature.functions.at("sk1"), 1);
  EXPECT_TRUE(r.signature.skolem_symbols.count("sk1"));
}

TEST(Skolemize, TopLevelExistsBecomesConstant) {
  auto sig = cat_signature();
  auto r = skolemize(parse_formula("exists y (Cat(y))", sig), sig);
  EXPECT_EQ(r.formula, Formula::atom("Cat", {c("sk1")}));
  EXPECT_TRUE(r.signature.is_constant("sk1"));
}

TEST(Skolemize, ExistsFreeIsIdentity) {
  auto sig = cat_signature();
  Formula f = parse_formula("forall x (Cat(x) -> not Tail(x))", sig);
  auto r = skolemize(f, sig);
  EXPECT_EQ(r.formula, f);
  EXPECT_EQ(r.signature, sig);
}

TEST(Skolemize, CounterContinuesAndCollides) {
  auto sig = cat_signature();
  KnowledgeBase kb{sig, {parse_formula("exists y (Cat(y))", sig),
                         parse_formula("forall x y (exists z (partOf(z, x) and Tail(y)))", sig)}};
  auto out = skolemize_kb(kb);
  EXPECT_TRUE(out.signature.is_constant("sk1"));
  EXPECT_EQ(out.signature.functions.at("sk2"), 2);
  EXPECT_TRUE(validate_kb(out).empty());

  Signature clash = sig;
  clash.add_predicate("sk1", 1);
  EXPECT_THROW(skolemize(parse_formula("exists y (Cat(y))", clash), clash), SymbolCollision);
}

TEST(Skolemize, NegativeExistsStaysUniversal) {
  auto sig = cat_signature();
  auto r = skolemize(parse_formula("not exists y (Cat(y))", sig), sig);
  EXPECT_FALSE(contains_exists(r.formula));
  EXPECT_TRUE(r.signature.skolem_symbols.empty());
  auto r2 = skolemize(parse_formula("(exists y (Cat(y))) -> Tail(b1)", sig), sig);
  EXPECT_TRUE(r2.signature.skolem_symbols.empty());
}

TEST(Skolemize, OpenFormulaRejected) {
  auto sig = cat_signature();
  EXPECT_THROW(skolemize(Formula::exists("y", Formula::atom("partOf", {v("x"), v("y")})), sig),
               NotClosed);
}

TEST(ValidateKb, Examples) {
  auto sig = cat_signature();
  KnowledgeBase good{sig, {parse_formula("forall x (Cat(x) -> Tail(x))", sig)}};
  EXPECT_TRUE(validate_kb(good).empty());

  KnowledgeBase open{sig, {Formula::atom("Cat", {c("b1")}),
                           Formula::atom("partOf", {v("x"), c("b1")})}};
  auto d = validate_kb(open);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].kind, "NotClosed");
  EXPECT_EQ(d[0].formula_index, 1u);

  KnowledgeBase arity{sig, {Formula::atom("partOf", {c("b1")})}};
  d = validate_kb(arity);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].kind, "ArityMismatch");
  EXPECT_NE(d[0].message.find("expected 2, got 1"), std::string::npos);
}

TEST(Signature, InvariantsEnforced) {
  Signature s;
  s.add_constant("a");
  EXPECT_THROW(s.add_predicate("a", 1), SymbolCollision);
  EXPECT_THROW(s.add_function("g", 0), ArityMismatch);
}

TEST(KbFile, RoundTripAndOffsets) {
  std::string text =
      "signature:\n"
      "const b1, b2\n"
      "pred Cat/1, partOf/2\n"
      "# axioms\n"
      "Cat(b1)\n"
      "forall x y (partOf(x, y) -> not partOf(y, x))\n";
  auto kb = parse_kb(text);
  ASSERT_EQ(kb.formulas.size(), 2u);
  auto again = parse_kb(print_kb(kb));
  EXPECT_EQ(again.signature, kb.signature);
  ASSERT_EQ(again.formulas.size(), 2u);
  EXPECT_EQ(again.formulas[1], kb.formulas[1]);

  try {
    parse_kb(text + "Cat(b1) or\n");
    FAIL();
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.position(), text.size() + 10);
  }
}

TEST(Properties, PrintParseRoundTrip) {
  auto sig = cat_signature();
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::string> vars;
    Formula f = random_formula(rng, 6, vars);
    std::string text = to_string(f);
    ASSERT_EQ(parse_formula(text, sig), f) << text;
  }
}

TEST(Properties, SkolemizeIsIdempotentAndClosed) {
  auto sig = cat_signature();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::string> vars;
    Formula f = random_formula(rng, 6, vars);
    auto once = skolemize(f, sig);
    EXPECT_FALSE(contains_exists(once.formula));
    EXPECT_TRUE(free_variables(once.formula).empty()) << to_string(f);
    auto twice = skolemize(once.formula, once.signature);
    EXPECT_EQ(twice.formula, once.formula);
    EXPECT_EQ(twice.signature, once.signature);
    KnowledgeBase kb{once.signature, {once.formula}};
    EXPECT_TRUE(validate_kb(kb).empty()) << to_string(once.formula);
  }
}

TEST(Properties, EquisatisfiableOnSampledSmallFormulas) {
  Signature sig;
  sig.add_constant("a");
  sig.add_constant("b");
  sig.add_predicate("P", 1);
  sig.add_predicate("R", 2);
  std::size_t i = 0, checked = 0;
  oracle::enumerate_formulas(sig, 3, [&](const Formula& f) {
    if (i++ % 97 != 0) return;
    auto s = skolemize(f, sig);
    for (int d = 1; d <= 2; ++d)
      ASSERT_EQ(oracle::satisfiable_on(f, sig, d), oracle::satisfiable_on(s.formula, s.signature, d))
          << to_string(f) << " / " << to_string(s.formula) << " domain " << d;
    ++checked;
  });
  EXPECT_GT(checked, 600u);
}
