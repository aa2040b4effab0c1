#pragma once

#include <string>
#include <string_view>

#include "ltn/ast.hpp"

namespace ltn {

struct ParseOptions {
  // When false, an identifier in term position that is neither bound by an
  // enclosing quantifier nor a declared constant is an UnknownSymbol error.
  // When true it becomes a free variable (validate_kb reports NotClosed).
  bool allow_free_variables = false;
};

// Grammar (case-sensitive; `#` starts a comment running to end of line):
//
//   formula     := implication
//   implication := disjunction [ '->' implication ]        right-associative
//   disjunction := conjunction { 'or' conjunction }         left-associative
//   conjunction := unary { 'and' unary }                    left-associative
//   unary       := 'not' unary
//                | ('forall' | 'exists') VAR { VAR } '(' formula ')'
//                | atom
//                | '(' formula ')'
//   atom        := PRED '(' term { ',' term } ')'
//   term        := VAR | CONST | FUNC '(' term { ',' term } ')'
//   identifier  := [A-Za-z_][A-Za-z0-9_]*
//
// `forall x y (φ)` is shorthand for `forall x (forall y (φ))`.
Formula parse_formula(std::string_view text, const Signature& sig, ParseOptions opts = {});

// Knowledge-base file: an optional `signature:` preamble of declaration lines
//
//   const NAME { ',' NAME }
//   func NAME '/' ARITY { ',' NAME '/' ARITY }
//   pred NAME '/' ARITY { ',' NAME '/' ARITY }
//
// followed by one formula per line. Formulas may be open; validate_kb reports
// them. Errors carry absolute byte offsets into `text`.
KnowledgeBase parse_kb(std::string_view text, ParseOptions opts = {.allow_free_variables = true});
KnowledgeBase load_kb(const std::string& path);

// Inverse of parse_kb (declarations in sorted order, then formulas).
std::string print_kb(const KnowledgeBase& kb);

bool is_reserved_word(std::string_view word);

}  // namespace ltn
