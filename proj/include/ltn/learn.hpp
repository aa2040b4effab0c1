#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltn/io.hpp"
#include "ltn/semantics.hpp"

namespace ltn {

// What gradient descent maximizes.
//  Conjunction: the t-norm fold of every formula truth, in declaration order.
//  Grouped: mean_p (the theory's aggregator) over units, where ground
//    literals sharing predicate and sign form one unit (their own mean_p)
//    and every other formula is a unit by itself. Under Lukasiewicz the
//    fold of many formulas is flat at zero for a random start, this is not.
enum class Objective { Conjunction, Grouped };

Objective parse_objective(const std::string& name);  // conjunction | grouped
std::string to_string(Objective o);

struct TrainConfig {
  std::size_t epochs = 1000;
  double lambda = 1e-10;
  double learning_rate = 0.01;
  double decay = 0.9;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;  // parameter initialization
  Objective objective = Objective::Grouped;
  void check() const;
};

struct TrainReport {
  std::vector<double> trace;  // satisfiability before each update
  double final_satisfiability = 0.0;
  std::vector<double> truths;  // per formula, after training
  double wall_seconds = 0.0;
  // Everything but the wall time, so equal runs give equal bytes.
  Json to_json(const KnowledgeBase& kb) const;
};

// Truth of every formula of K under the current grounding, in order.
std::vector<double> formula_truths(const GroundedTheory& t);
// Fold of `truths` with the t-norm conjunction, left to right; 1 for none.
double conjunction(TNorm t, const std::vector<double>& truths);
// G(conjunction of K).
double satisfiability(const GroundedTheory& t);

// The training graph of a theory: loss = (1 - objective) + lambda * sum θ².
class LossGraph {
 public:
  LossGraph(const GroundedTheory& t, double lambda, Objective objective);

  ad::Graph& graph() { return graph_; }
  ad::NodeId loss() const { return loss_; }
  ad::NodeId objective() const { return objective_; }

  struct Result {
    double loss;
    double objective;
    std::vector<double> truths;
    ad::Values values;
  };
  Result forward(const ad::ParamStore& params) const;
  // Gradients keyed by parameter name.
  ad::ParamStore gradients(const Result& r) const;

 private:
  struct Slot {
    ad::NodeId node;
    std::size_t offset;
  };
  ad::Graph graph_;
  ad::NodeId loss_ = 0;
  ad::NodeId objective_ = 0;
  std::vector<Slot> slots_;
};

double loss(const GroundedTheory& t, double lambda, Objective objective = Objective::Conjunction);

struct RmsPropState {
  ad::ParamStore mean_square;
};

// s <- decay*s + (1-decay)*g²;  θ <- θ - lr*g / (sqrt(s) + epsilon).
void rmsprop_step(ad::ParamStore& params, const ad::ParamStore& grads, RmsPropState& state,
                  const TrainConfig& cfg);

// Full-batch RMSProp on the loss; updates t.params in place.
// NonFiniteValue aborts with the epoch index in the message.
TrainReport train(GroundedTheory& t, const TrainConfig& cfg);

// Truth of a closed, ∃-free formula under the learned grounding.
double query(const GroundedTheory& t, const Formula& f);

}  // namespace ltn
