#pragma once

#include "ltn/ast.hpp"

namespace ltn {

struct SkolemResult {
  Formula formula;
  Signature signature;
};

// Eliminates existential quantifiers from a closed formula.
//
// An ∃y in positive position under the universally quantified variables
// x1..xn is replaced by sk<N>(x1,..,xn) (a fresh constant when n = 0). An ∃y in
// negative position (under an odd number of negations / implication
// antecedents) is universal in effect and is rewritten as ¬∀y¬. Formulas
// without ∃ come back unchanged.
//
// Fresh names continue the per-signature counter (|skolem_symbols| + 1); a
// fresh name that collides with a user symbol throws SymbolCollision.
// Throws NotClosed when `f` has free variables.
SkolemResult skolemize(const Formula& f, const Signature& sig);

// Skolemizes every formula in order, threading the signature through.
KnowledgeBase skolemize_kb(const KnowledgeBase& kb);

}  // namespace ltn
