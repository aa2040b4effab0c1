#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ltn::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& s);
std::size_t shape_size(const Shape& s);

// Dense row-major tensor of doubles. Rank 0 is a scalar.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor vector(std::vector<double> v) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool all_finite() const;
  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_{0};  // a default tensor is empty, not a scalar
  std::vector<double> data_;
};

using NodeId = std::size_t;

enum class Op {
  Input,
  Param,
  Const,
  MatMul,
  Add,
  Mul,
  Neg,
  ScaleShift,  // a*x + c with scalar constants a, c
  Tanh,
  Sigmoid,
  Bilinear,  // per slice: x^T W_i y
  Clamp,
  Pow,
  Sum,
  Mean,
  ReduceMin,
  Min,
  Max,
  Residuum,  // fuzzy implication a => b of the product / Goedel t-norms
  Concat,
  Gather,
  RowBroadcast,
};

const char* op_name(Op op);

enum class ResiduumFamily { Product, Goedel };

struct Node {
  Op op;
  std::vector<NodeId> operands;
  Shape shape;
  std::string name;  // Input / Param
  double a = 0.0;    // ScaleShift scale, Clamp lo, Pow exponent
  double c = 0.0;    // ScaleShift shift, Clamp hi
  int axis = 0;      // Concat axis (0 or -1); MatMul transpose flag; Residuum family
  // Gather row indices, or segment id per element for Sum/Mean/ReduceMin.
  std::vector<std::size_t> indices;
  std::size_t segments = 0;  // 0 = reduce to a scalar
  Tensor value;              // Const
  bool requires_grad = false;
};

// Append-only computation graph; operands always refer to earlier nodes.
class Graph {
 public:
  NodeId input(const std::string& name, Shape shape);
  NodeId param(const std::string& name, Shape shape);
  NodeId constant(Tensor value);
  NodeId scalar(double v) { return constant(Tensor::scalar(v)); }

  // a [m,k] x b [k,n] -> [m,n]; a [m,k] x b [k] -> [m]. With transpose_b,
  // b is read as [n,k].
  NodeId matmul(NodeId a, NodeId b, bool transpose_b = false);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId neg(NodeId x);
  NodeId scale_shift(NodeId x, double scale, double shift);
  NodeId tanh(NodeId x);
  NodeId sigmoid(NodeId x);
  // x, y: [D] or [B,D]; w: [k,D,D]. Result [k] or [B,k].
  NodeId bilinear(NodeId x, NodeId w, NodeId y);
  NodeId clamp(NodeId x, double lo, double hi);
  NodeId pow(NodeId x, double exponent);
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId reduce_min(NodeId x);
  // Segmented reductions over a rank-1 input; result has `segments` entries.
  NodeId segment_sum(NodeId x, std::vector<std::size_t> segment_of, std::size_t segments);
  NodeId segment_mean(NodeId x, std::vector<std::size_t> segment_of, std::size_t segments);
  NodeId segment_min(NodeId x, std::vector<std::size_t> segment_of, std::size_t segments);
  NodeId min(NodeId a, NodeId b);
  NodeId max(NodeId a, NodeId b);
  NodeId residuum(NodeId a, NodeId b, ResiduumFamily family);
  // axis 0 stacks rows (rank-1 pieces count as one row); axis -1 joins columns.
  NodeId concat(const std::vector<NodeId>& parts, int axis);
  NodeId gather(NodeId x, std::vector<std::size_t> rows);
  NodeId row_broadcast(NodeId v, std::size_t rows);

  const Node& node(NodeId id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeId>& params() const { return params_; }
  const std::vector<NodeId>& inputs() const { return inputs_; }
  NodeId param_id(const std::string& name) const;

 private:
  NodeId push(Node n);
  NodeId reduce(Op op, NodeId x, std::vector<std::size_t> segment_of, std::size_t segments);
  NodeId elementwise(Op op, NodeId a, NodeId b);

  std::vector<Node> nodes_;
  std::vector<NodeId> params_;
  std::vector<NodeId> inputs_;
};

using Bindings = std::map<NodeId, Tensor>;
using Values = std::vector<Tensor>;
using Gradients = std::map<NodeId, Tensor>;
using ParamStore = std::map<std::string, Tensor>;

// Binds every Param node of `g` from `store` by name (missing names throw
// MissingInput).
Bindings bind_params(const Graph& g, const ParamStore& store, Bindings extra = {});

// Values for all nodes. Throws MissingInput, ShapeMismatch or NonFiniteValue.
Values evaluate_forward(const Graph& g, const Bindings& inputs);

// Reverse-mode gradient of a scalar `output` w.r.t. every Param node.
// Subgradients: max/min ties go to the first operand, Clamp passes the
// gradient only strictly inside its interval.
Gradients backward_gradients(const Graph& g, NodeId output, const Values& values);

// Central-difference check of backward_gradients. Returns the max over
// parameter coordinates of |analytic - numeric| / max(1, |numeric|), skipping
// coordinates whose perturbation moves a Max/Min/Clamp/Residuum/ReduceMin
// operand within 10*eps of its kink.
struct GradCheckReport {
  double max_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};
GradCheckReport finite_difference_report(const Graph& g, NodeId output, const Bindings& at,
                                         double eps);
double finite_difference_check(const Graph& g, NodeId output, const Bindings& at, double eps);

}  // namespace ltn::ad
