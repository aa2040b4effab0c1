#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ltn/ast.hpp"
#include "ltn/autodiff.hpp"

namespace ltn {

struct GroundingConfig {
  std::size_t n = 1;  // embedding dimension of constants
  std::size_t k = 6;  // tensor layers per predicate
  void check() const;
};

// G(f)(v) = M v + N with M: [n, m*n], N: [n].
struct FunctionGrounding {
  ad::Tensor M;
  ad::Tensor N;
};

// G(P)(v) = sigmoid(u^T tanh(v^T W[1:k] v + V v + b)).
// W: [k, m*n, m*n], V: [k, m*n], b: [k], u: [k].
struct PredicateGrounding {
  ad::Tensor W;
  ad::Tensor V;
  ad::Tensor b;
  ad::Tensor u;
};

using Vec = std::vector<double>;

std::vector<double> apply_function(const FunctionGrounding& fg, const std::vector<Vec>& args);
double apply_predicate(const PredicateGrounding& pg, const std::vector<Vec>& args);

// Parameter-store keys.
std::string predicate_key(const std::string& pred, const char* block);  // W, V, b, u
std::string function_key(const std::string& func, const char* block);   // M, N
std::string constant_key(const std::string& constant);                   // vec

PredicateGrounding predicate_grounding(const ad::ParamStore& store, const std::string& pred);
FunctionGrounding function_grounding(const ad::ParamStore& store, const std::string& func);

// Learnable groundings for every function and predicate of `sig`, plus a
// vector for each constant listed in `learnable_constants`. Entries are
// i.i.d. uniform in [-0.1, 0.1]; draws follow predicates, then functions, then
// constants, each in name order, blocks in the order listed above.
ad::ParamStore init_parameters(const GroundingConfig& cfg, const Signature& sig,
                               std::uint64_t seed,
                               const std::set<std::string>& learnable_constants = {});

// Seeded random draws with a fixed bit-level recipe (the standard
// distributions are implementation-defined, this is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi);        // [lo, hi)
  std::uint64_t index(std::uint64_t bound);    // [0, bound)
  double gaussian();                           // N(0, 1), Box-Muller

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Graph-side handles for a predicate's four parameter blocks.
struct PredicateNodes {
  ad::NodeId W, V, b, u;
};
struct FunctionNodes {
  ad::NodeId M, N;
};

PredicateNodes declare_predicate(ad::Graph& g, const std::string& pred, std::size_t arity,
                                 const GroundingConfig& cfg);
FunctionNodes declare_function(ad::Graph& g, const std::string& func, std::size_t arity,
                               const GroundingConfig& cfg);

// `v` holds concatenated arguments, [m*n] or one row per tuple [R, m*n].
// Results are [1] or [R] truth values and [n] or [R, n] vectors respectively.
ad::NodeId predicate_node(ad::Graph& g, const PredicateNodes& p, ad::NodeId v);
ad::NodeId function_node(ad::Graph& g, const FunctionNodes& f, ad::NodeId v);

}  // namespace ltn
