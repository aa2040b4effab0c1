#include "ltn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ltn/error.hpp"

namespace ltn::ad {

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_))
    throw ShapeMismatch("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(shape_));
}

double Tensor::item() const {
  if (data_.size() != 1)
    throw NonScalarOutput("tensor of shape " + shape_string(shape_) + " is not scalar");
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "Input";
    case Op::Param: return "Param";
    case Op::Const: return "Const";
    case Op::MatMul: return "MatMul";
    case Op::Add: return "Add";
    case Op::Mul: return "Mul";
    case Op::Neg: return "Neg";
    case Op::ScaleShift: return "ScaleShift";
    case Op::Tanh: return "Tanh";
    case Op::Sigmoid: return "Sigmoid";
    case Op::Bilinear: return "Bilinear";
    case Op::Clamp: return "Clamp";
    case Op::Pow: return "Pow";
    case Op::Sum: return "Sum";
    case Op::Mean: return "Mean";
    case Op::ReduceMin: return "ReduceMin";
    case Op::Min: return "Min";
    case Op::Max: return "Max";
    case Op::Residuum: return "Residuum";
    case Op::Concat: return "Concat";
    case Op::Gather: return "Gather";
    case Op::RowBroadcast: return "RowBroadcast";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Graph construction

NodeId Graph::push(Node n) {
  for (NodeId o : n.operands) {
    if (o >= nodes_.size()) throw std::logic_error("operand refers to a later node");
    if (nodes_[o].requires_grad) n.requires_grad = true;
  }
  if (n.op == Op::Param) n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Graph::input(const std::string& name, Shape shape) {
  Node n{Op::Input, {}, std::move(shape)};
  n.name = name;
  NodeId id = push(std::move(n));
  inputs_.push_back(id);
  return id;
}

NodeId Graph::param(const std::string& name, Shape shape) {
  Node n{Op::Param, {}, std::move(shape)};
  n.name = name;
  NodeId id = push(std::move(n));
  params_.push_back(id);
  return id;
}

NodeId Graph::param_id(const std::string& name) const {
  for (NodeId id : params_)
    if (nodes_[id].name == name) return id;
  throw MissingInput("no parameter named '" + name + "'");
}

NodeId Graph::constant(Tensor value) {
  if (!value.all_finite()) throw NonFiniteValue(nodes_.size(), "non-finite constant");
  Node n{Op::Const, {}, value.shape()};
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::elementwise(Op op, NodeId a, NodeId b) {
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  Shape out;
  if (sa == sb)
    out = sa;
  else if (shape_size(sa) == 1)
    out = sb;
  else if (shape_size(sb) == 1)
    out = sa;
  else
    throw ShapeMismatch(std::string(op_name(op)) + ": " + shape_string(sa) + " vs " +
                        shape_string(sb));
  return push(Node{op, {a, b}, out});
}

NodeId Graph::add(NodeId a, NodeId b) { return elementwise(Op::Add, a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return elementwise(Op::Mul, a, b); }
NodeId Graph::min(NodeId a, NodeId b) { return elementwise(Op::Min, a, b); }
NodeId Graph::max(NodeId a, NodeId b) { return elementwise(Op::Max, a, b); }

NodeId Graph::residuum(NodeId a, NodeId b, ResiduumFamily family) {
  NodeId id = elementwise(Op::Residuum, a, b);
  nodes_[id].axis = static_cast<int>(family);
  return id;
}

NodeId Graph::neg(NodeId x) { return push(Node{Op::Neg, {x}, node(x).shape}); }
NodeId Graph::tanh(NodeId x) { return push(Node{Op::Tanh, {x}, node(x).shape}); }
NodeId Graph::sigmoid(NodeId x) { return push(Node{Op::Sigmoid, {x}, node(x).shape}); }

NodeId Graph::scale_shift(NodeId x, double scale, double shift) {
  Node n{Op::ScaleShift, {x}, node(x).shape};
  n.a = scale;
  n.c = shift;
  return push(std::move(n));
}

NodeId Graph::clamp(NodeId x, double lo, double hi) {
  if (!(lo <= hi)) throw ShapeMismatch("Clamp: empty interval");
  Node n{Op::Clamp, {x}, node(x).shape};
  n.a = lo;
  n.c = hi;
  return push(std::move(n));
}

NodeId Graph::pow(NodeId x, double exponent) {
  Node n{Op::Pow, {x}, node(x).shape};
  n.a = exponent;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b, bool transpose_b) {
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  if (sa.size() != 2)
    throw ShapeMismatch("MatMul: left operand must be a matrix, got " + shape_string(sa));
  Shape out;
  if (sb.size() == 1) {
    if (sb[0] != sa[1])
      throw ShapeMismatch("MatMul: " + shape_string(sa) + " x " + shape_string(sb));
    out = {sa[0]};
    transpose_b = false;
  } else if (sb.size() == 2) {
    std::size_t inner = transpose_b ? sb[1] : sb[0];
    std::size_t cols = transpose_b ? sb[0] : sb[1];
    if (inner != sa[1])
      throw ShapeMismatch("MatMul: " + shape_string(sa) + " x " + shape_string(sb) +
                          (transpose_b ? "^T" : ""));
    out = {sa[0], cols};
  } else {
    throw ShapeMismatch("MatMul: right operand rank " + std::to_string(sb.size()));
  }
  Node n{Op::MatMul, {a, b}, out};
  n.axis = transpose_b ? 1 : 0;
  return push(std::move(n));
}

NodeId Graph::bilinear(NodeId x, NodeId w, NodeId y) {
  const Shape& sx = node(x).shape;
  const Shape& sw = node(w).shape;
  const Shape& sy = node(y).shape;
  if (sw.size() != 3 || sw[1] != sw[2])
    throw ShapeMismatch("Bilinear: weight must be [k,D,D], got " + shape_string(sw));
  if (sx != sy || sx.empty() || sx.size() > 2 || sx.back() != sw[1])
    throw ShapeMismatch("Bilinear: " + shape_string(sx) + ", " + shape_string(sw) + ", " +
                        shape_string(sy));
  Shape out = sx.size() == 1 ? Shape{sw[0]} : Shape{sx[0], sw[0]};
  return push(Node{Op::Bilinear, {x, w, y}, out});
}

NodeId Graph::reduce(Op op, NodeId x, std::vector<std::size_t> segment_of, std::size_t segments) {
  Node n{op, {x}, Shape{}};
  if (segments > 0) {
    if (node(x).shape.size() != 1 || segment_of.size() != node(x).shape[0])
      throw ShapeMismatch(std::string(op_name(op)) + ": segment ids do not match input " +
                          shape_string(node(x).shape));
    for (auto s : segment_of)
      if (s >= segments) throw ShapeMismatch("segment id out of range");
    n.shape = {segments};
    n.indices = std::move(segment_of);
    n.segments = segments;
  } else if (shape_size(node(x).shape) == 0) {
    throw EmptyDomain(std::string(op_name(op)) + " over an empty tensor");
  }
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) { return reduce(Op::Sum, x, {}, 0); }
NodeId Graph::mean(NodeId x) { return reduce(Op::Mean, x, {}, 0); }
NodeId Graph::reduce_min(NodeId x) { return reduce(Op::ReduceMin, x, {}, 0); }
NodeId Graph::segment_sum(NodeId x, std::vector<std::size_t> seg, std::size_t n) {
  return reduce(Op::Sum, x, std::move(seg), n);
}
NodeId Graph::segment_mean(NodeId x, std::vector<std::size_t> seg, std::size_t n) {
  return reduce(Op::Mean, x, std::move(seg), n);
}
NodeId Graph::segment_min(NodeId x, std::vector<std::size_t> seg, std::size_t n) {
  return reduce(Op::ReduceMin, x, std::move(seg), n);
}

NodeId Graph::concat(const std::vector<NodeId>& parts, int axis) {
  if (parts.empty()) throw ShapeMismatch("Concat of nothing");
  Shape out;
  if (axis == 0) {
    std::size_t width = 0, rows = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Shape& s = node(parts[i]).shape;
      std::size_t w = s.size() == 1 ? s[0] : (s.size() == 2 ? s[1] : 0);
      if (s.empty() || s.size() > 2 || (i && w != width))
        throw ShapeMismatch("Concat(axis 0): incompatible piece " + shape_string(s));
      width = w;
      rows += s.size() == 1 ? 1 : s[0];
    }
    out = {rows, width};
  } else if (axis == -1) {
    const Shape& s0 = node(parts[0]).shape;
    std::size_t total = 0;
    for (NodeId p : parts) {
      const Shape& s = node(p).shape;
      if (s.size() != s0.size() || s.empty() || s.size() > 2 ||
          (s.size() == 2 && s[0] != s0[0]))
        throw ShapeMismatch("Concat(axis -1): incompatible piece " + shape_string(s));
      total += s.back();
    }
    out = s0.size() == 1 ? Shape{total} : Shape{s0[0], total};
  } else {
    throw ShapeMismatch("Concat: axis must be 0 or -1");
  }
  Node n{Op::Concat, parts, out};
  n.axis = axis;
  return push(std::move(n));
}

NodeId Graph::gather(NodeId x, std::vector<std::size_t> rows) {
  const Shape& s = node(x).shape;
  if (s.empty() || s.size() > 2) throw ShapeMismatch("Gather: input " + shape_string(s));
  for (auto r : rows)
    if (r >= s[0]) throw ShapeMismatch("Gather: row " + std::to_string(r) + " out of range");
  Shape out = s;
  out[0] = rows.size();
  Node n{Op::Gather, {x}, out};
  n.indices = std::move(rows);
  return push(std::move(n));
}

NodeId Graph::row_broadcast(NodeId v, std::size_t rows) {
  const Shape& s = node(v).shape;
  if (s.size() != 1) throw ShapeMismatch("RowBroadcast: input " + shape_string(s));
  return push(Node{Op::RowBroadcast, {v}, Shape{rows, s[0]}});
}

// ---------------------------------------------------------------------------
// Forward

namespace {

inline double sigmoid_fn(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline std::size_t bidx(const Tensor& t, std::size_t i) { return t.size() == 1 ? 0 : i; }

double residuum_fn(ResiduumFamily fam, double a, double b) {
  if (a <= b) return 1.0;
  return fam == ResiduumFamily::Product ? b / a : b;
}

Tensor compute(const Node& n, const Values& v) {
  auto in = [&](std::size_t k) -> const Tensor& { return v[n.operands[k]]; };
  Tensor out(n.shape);
  auto& o = out.storage();
  switch (n.op) {
    case Op::Input:
    case Op::Param:
    case Op::Const:
      break;
    case Op::Add:
    case Op::Mul:
    case Op::Min:
    case Op::Max:
    case Op::Residuum: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      for (std::size_t i = 0; i < o.size(); ++i) {
        double x = a[bidx(a, i)], y = b[bidx(b, i)];
        switch (n.op) {
          case Op::Add: o[i] = x + y; break;
          case Op::Mul: o[i] = x * y; break;
          case Op::Min: o[i] = x <= y ? x : y; break;
          case Op::Max: o[i] = x >= y ? x : y; break;
          default: o[i] = residuum_fn(static_cast<ResiduumFamily>(n.axis), x, y); break;
        }
      }
      break;
    }
    case Op::Neg: {
      const Tensor& a = in(0);
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = -a[i];
      break;
    }
    case Op::ScaleShift: {
      const Tensor& a = in(0);
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = n.a * a[i] + n.c;
      break;
    }
    case Op::Tanh: {
      const Tensor& a = in(0);
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(a[i]);
      break;
    }
    case Op::Sigmoid: {
      const Tensor& a = in(0);
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = sigmoid_fn(a[i]);
      break;
    }
    case Op::Clamp: {
      const Tensor& a = in(0);
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(a[i], n.a, n.c);
      break;
    }
    case Op::Pow: {
      const Tensor& a = in(0);
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::pow(a[i], n.a);
      break;
    }
    case Op::Sum:
    case Op::Mean:
    case Op::ReduceMin: {
      const Tensor& a = in(0);
      std::size_t segs = n.segments == 0 ? 1 : n.segments;
      std::vector<std::size_t> count(segs, 0);
      if (n.op == Op::ReduceMin) std::fill(o.begin(), o.end(), 0.0);
      for (std::size_t i = 0; i < a.size(); ++i) {
        std::size_t s = n.segments == 0 ? 0 : n.indices[i];
        if (n.op == Op::ReduceMin) {
          if (count[s] == 0 || a[i] < o[s]) o[s] = a[i];
        } else {
          o[s] += a[i];
        }
        ++count[s];
      }
      for (std::size_t s = 0; s < segs; ++s) {
        if (count[s] == 0 && n.op != Op::Sum)
          throw EmptyDomain(std::string(op_name(n.op)) + ": segment " + std::to_string(s) +
                            " is empty");
        if (n.op == Op::Mean) o[s] /= static_cast<double>(count[s]);
      }
      break;
    }
    case Op::MatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      std::size_t m = a.dim(0), k = a.dim(1);
      if (b.rank() == 1) {
        for (std::size_t i = 0; i < m; ++i) {
          double s = 0;
          const double* ar = &a.storage()[i * k];
          for (std::size_t j = 0; j < k; ++j) s += ar[j] * b[j];
          o[i] = s;
        }
      } else if (n.axis == 1) {
        std::size_t cols = b.dim(0);
        for (std::size_t i = 0; i < m; ++i) {
          const double* ar = &a.storage()[i * k];
          for (std::size_t c = 0; c < cols; ++c) {
            const double* br = &b.storage()[c * k];
            double s = 0;
            for (std::size_t j = 0; j < k; ++j) s += ar[j] * br[j];
            o[i * cols + c] = s;
          }
        }
      } else {
        std::size_t cols = b.dim(1);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            double aij = a[i * k + j];
            const double* br = &b.storage()[j * cols];
            double* orow = &o[i * cols];
            for (std::size_t c = 0; c < cols; ++c) orow[c] += aij * br[c];
          }
      }
      break;
    }
    case Op::Bilinear: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      const Tensor& y = in(2);
      std::size_t k = w.dim(0), d = w.dim(1);
      std::size_t batch = x.rank() == 1 ? 1 : x.dim(0);
      for (std::size_t b = 0; b < batch; ++b) {
        const double* xr = &x.storage()[b * d];
        const double* yr = &y.storage()[b * d];
        for (std::size_t s = 0; s < k; ++s) {
          const double* ws = &w.storage()[s * d * d];
          double acc = 0;
          for (std::size_t j = 0; j < d; ++j) {
            if (xr[j] == 0.0) continue;
            const double* wr = ws + j * d;
            double t = 0;
            for (std::size_t l = 0; l < d; ++l) t += wr[l] * yr[l];
            acc += xr[j] * t;
          }
          o[b * k + s] = acc;
        }
      }
      break;
    }
    case Op::Concat: {
      if (n.axis == 0) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < n.operands.size(); ++p) {
          const Tensor& t = in(p);
          std::copy(t.storage().begin(), t.storage().end(), o.begin() + off);
          off += t.size();
        }
      } else {
        std::size_t rows = n.shape.size() == 1 ? 1 : n.shape[0];
        std::size_t width = n.shape.back();
        std::size_t col = 0;
        for (std::size_t p = 0; p < n.operands.size(); ++p) {
          const Tensor& t = in(p);
          std::size_t w = t.shape().back();
          for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(&t.storage()[r * w], w, &o[r * width + col]);
          col += w;
        }
      }
      break;
    }
    case Op::Gather: {
      const Tensor& a = in(0);
      std::size_t w = a.rank() == 1 ? 1 : a.dim(1);
      for (std::size_t r = 0; r < n.indices.size(); ++r)
        std::copy_n(&a.storage()[n.indices[r] * w], w, &o[r * w]);
      break;
    }
    case Op::RowBroadcast: {
      const Tensor& a = in(0);
      std::size_t w = a.size();
      for (std::size_t r = 0; r < n.shape[0]; ++r) std::copy_n(a.storage().data(), w, &o[r * w]);
      break;
    }
  }
  return out;
}

}  // namespace

Bindings bind_params(const Graph& g, const ParamStore& store, Bindings extra) {
  for (NodeId id : g.params()) {
    auto it = store.find(g.node(id).name);
    if (it == store.end())
      throw MissingInput("parameter '" + g.node(id).name + "' has no value");
    extra[id] = it->second;
  }
  return extra;
}

Values evaluate_forward(const Graph& g, const Bindings& inputs) {
  Values v(g.size());
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    if (n.op == Op::Input || n.op == Op::Param) {
      auto it = inputs.find(id);
      if (it == inputs.end())
        throw MissingInput(std::string(op_name(n.op)) + " '" + n.name + "' (node " +
                           std::to_string(id) + ") is unbound");
      if (it->second.shape() != n.shape)
        throw ShapeMismatch(std::string(op_name(n.op)) + " '" + n.name + "' expects " +
                            shape_string(n.shape) + ", got " +
                            shape_string(it->second.shape()));
      v[id] = it->second;
    } else if (n.op == Op::Const) {
      v[id] = n.value;
    } else {
      v[id] = compute(n, v);
    }
    if (!v[id].all_finite()) throw NonFiniteValue(id, std::string(op_name(n.op)) + " output");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Backward

Gradients backward_gradients(const Graph& g, NodeId output, const Values& values) {
  if (output >= g.size() || values.size() != g.size())
    throw MissingInput("forward values do not match the graph");
  if (values[output].size() != 1)
    throw NonScalarOutput("output node " + std::to_string(output) + " has shape " +
                          shape_string(values[output].shape()));

  std::vector<Tensor> grad(g.size());
  auto acc = [&](NodeId id) -> Tensor& {
    if (grad[id].size() == 0 && shape_size(g.node(id).shape) != 0)
      grad[id] = Tensor(g.node(id).shape);
    return grad[id];
  };
  acc(output)[0] = 1.0;

  for (NodeId id = output + 1; id-- > 0;) {
    const Node& n = g.node(id);
    if (!n.requires_grad || grad[id].size() == 0) continue;
    const Tensor& gy = grad[id];
    auto wants = [&](std::size_t k) { return g.node(n.operands[k]).requires_grad; };
    auto val = [&](std::size_t k) -> const Tensor& { return values[n.operands[k]]; };

    switch (n.op) {
      case Op::Input:
      case Op::Param:
      case Op::Const:
        break;
      case Op::Add:
      case Op::Mul:
      case Op::Min:
      case Op::Max:
      case Op::Residuum: {
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        Tensor* ga = wants(0) ? &acc(n.operands[0]) : nullptr;
        Tensor* gb = wants(1) ? &acc(n.operands[1]) : nullptr;
        for (std::size_t i = 0; i < gy.size(); ++i) {
          double x = a[bidx(a, i)], y = b[bidx(b, i)], d = gy[i];
          double da = 0, db = 0;
          switch (n.op) {
            case Op::Add: da = d; db = d; break;
            case Op::Mul: da = d * y; db = d * x; break;
            case Op::Min: (x <= y ? da : db) = d; break;
            case Op::Max: (x >= y ? da : db) = d; break;
            default:
              if (x > y) {
                if (static_cast<ResiduumFamily>(n.axis) == ResiduumFamily::Product) {
                  da = -d * y / (x * x);
                  db = d / x;
                } else {
                  db = d;
                }
              }
              break;
          }
          if (ga) (*ga)[bidx(a, i)] += da;
          if (gb) (*gb)[bidx(b, i)] += db;
        }
        break;
      }
      case Op::Neg:
      case Op::ScaleShift:
      case Op::Tanh:
      case Op::Sigmoid:
      case Op::Clamp:
      case Op::Pow: {
        if (!wants(0)) break;
        const Tensor& x = val(0);
        const Tensor& y = values[id];
        Tensor& gx = acc(n.operands[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          double d = gy[i];
          switch (n.op) {
            case Op::Neg: gx[i] -= d; break;
            case Op::ScaleShift: gx[i] += n.a * d; break;
            case Op::Tanh: gx[i] += d * (1.0 - y[i] * y[i]); break;
            case Op::Sigmoid: gx[i] += d * y[i] * (1.0 - y[i]); break;
            case Op::Clamp:
              if (x[i] > n.a && x[i] < n.c) gx[i] += d;
              break;
            default:
              if (n.a != 0.0) gx[i] += d * n.a * std::pow(x[i], n.a - 1.0);
              break;
          }
        }
        break;
      }
      case Op::Sum:
      case Op::Mean:
      case Op::ReduceMin: {
        if (!wants(0)) break;
        const Tensor& x = val(0);
        Tensor& gx = acc(n.operands[0]);
        std::size_t segs = n.segments == 0 ? 1 : n.segments;
        auto seg = [&](std::size_t i) { return n.segments == 0 ? 0 : n.indices[i]; };
        if (n.op == Op::ReduceMin) {
          std::vector<bool> taken(segs, false);
          const Tensor& y = values[id];
          for (std::size_t i = 0; i < x.size(); ++i) {
            std::size_t s = seg(i);
            if (!taken[s] && x[i] == y[s]) {
              gx[i] += gy[s];
              taken[s] = true;
            }
          }
        } else {
          std::vector<double> count(segs, 0.0);
          if (n.op == Op::Mean)
            for (std::size_t i = 0; i < x.size(); ++i) count[seg(i)] += 1.0;
          for (std::size_t i = 0; i < x.size(); ++i) {
            std::size_t s = seg(i);
            gx[i] += n.op == Op::Mean ? gy[s] / count[s] : gy[s];
          }
        }
        break;
      }
      case Op::MatMul: {
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        std::size_t m = a.dim(0), k = a.dim(1);
        Tensor* ga = wants(0) ? &acc(n.operands[0]) : nullptr;
        Tensor* gb = wants(1) ? &acc(n.operands[1]) : nullptr;
        if (b.rank() == 1) {
          for (std::size_t i = 0; i < m; ++i) {
            double d = gy[i];
            if (d == 0.0) continue;
            for (std::size_t j = 0; j < k; ++j) {
              if (ga) (*ga)[i * k + j] += d * b[j];
              if (gb) (*gb)[j] += d * a[i * k + j];
            }
          }
        } else if (n.axis == 1) {
          std::size_t cols = b.dim(0);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t c = 0; c < cols; ++c) {
              double d = gy[i * cols + c];
              if (d == 0.0) continue;
              for (std::size_t j = 0; j < k; ++j) {
                if (ga) (*ga)[i * k + j] += d * b[c * k + j];
                if (gb) (*gb)[c * k + j] += d * a[i * k + j];
              }
            }
        } else {
          std::size_t cols = b.dim(1);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              double aij = a[i * k + j];
              double s = 0;
              for (std::size_t c = 0; c < cols; ++c) {
                double d = gy[i * cols + c];
                s += d * b[j * cols + c];
                if (gb) (*gb)[j * cols + c] += d * aij;
              }
              if (ga) (*ga)[i * k + j] += s;
            }
        }
        break;
      }
      case Op::Bilinear: {
        const Tensor& x = val(0);
        const Tensor& w = val(1);
        const Tensor& y = val(2);
        std::size_t k = w.dim(0), d = w.dim(1);
        std::size_t batch = x.rank() == 1 ? 1 : x.dim(0);
        Tensor* gx = wants(0) ? &acc(n.operands[0]) : nullptr;
        Tensor* gw = wants(1) ? &acc(n.operands[1]) : nullptr;
        Tensor* gyv = wants(2) ? &acc(n.operands[2]) : nullptr;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* xr = &x.storage()[b * d];
          const double* yr = &y.storage()[b * d];
          for (std::size_t s = 0; s < k; ++s) {
            double gd = gy[b * k + s];
            if (gd == 0.0) continue;
            const double* ws = &w.storage()[s * d * d];
            for (std::size_t j = 0; j < d; ++j) {
              const double* wr = ws + j * d;
              double xj = xr[j];
              if (gx) {
                double t = 0;
                for (std::size_t l = 0; l < d; ++l) t += wr[l] * yr[l];
                (*gx)[b * d + j] += gd * t;
              }
              if (xj == 0.0) continue;
              if (gyv)
                for (std::size_t l = 0; l < d; ++l) (*gyv)[b * d + l] += gd * xj * wr[l];
              if (gw) {
                double* gws = &gw->storage()[s * d * d + j * d];
                double f = gd * xj;
                for (std::size_t l = 0; l < d; ++l) gws[l] += f * yr[l];
              }
            }
          }
        }
        break;
      }
      case Op::Concat: {
        if (n.axis == 0) {
          std::size_t off = 0;
          for (std::size_t p = 0; p < n.operands.size(); ++p) {
            std::size_t sz = shape_size(g.node(n.operands[p]).shape);
            if (wants(p)) {
              Tensor& gp = acc(n.operands[p]);
              for (std::size_t i = 0; i < sz; ++i) gp[i] += gy[off + i];
            }
            off += sz;
          }
        } else {
          std::size_t rows = n.shape.size() == 1 ? 1 : n.shape[0];
          std::size_t width = n.shape.back();
          std::size_t col = 0;
          for (std::size_t p = 0; p < n.operands.size(); ++p) {
            std::size_t w = g.node(n.operands[p]).shape.back();
            if (wants(p)) {
              Tensor& gp = acc(n.operands[p]);
              for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += gy[r * width + col + c];
            }
            col += w;
          }
        }
        break;
      }
      case Op::Gather: {
        if (!wants(0)) break;
        Tensor& gx = acc(n.operands[0]);
        std::size_t w = gx.rank() == 1 ? 1 : gx.dim(1);
        for (std::size_t r = 0; r < n.indices.size(); ++r)
          for (std::size_t c = 0; c < w; ++c) gx[n.indices[r] * w + c] += gy[r * w + c];
        break;
      }
      case Op::RowBroadcast: {
        if (!wants(0)) break;
        Tensor& gx = acc(n.operands[0]);
        std::size_t w = gx.size();
        for (std::size_t r = 0; r < n.shape[0]; ++r)
          for (std::size_t c = 0; c < w; ++c) gx[c] += gy[r * w + c];
        break;
      }
    }
  }

  Gradients out;
  for (NodeId p : g.params()) {
    if (p > output || grad[p].size() == 0)
      out[p] = Tensor(g.node(p).shape);
    else
      out[p] = std::move(grad[p]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {

// Signed distances to every kink in the graph, in a fixed order.
std::vector<double> kink_margins(const Graph& g, const Values& v) {
  std::vector<double> m;
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    switch (n.op) {
      case Op::Min:
      case Op::Max:
      case Op::Residuum: {
        const Tensor& a = v[n.operands[0]];
        const Tensor& b = v[n.operands[1]];
        for (std::size_t i = 0; i < shape_size(n.shape); ++i)
          m.push_back(a[bidx(a, i)] - b[bidx(b, i)]);
        break;
      }
      case Op::Clamp: {
        const Tensor& x = v[n.operands[0]];
        for (std::size_t i = 0; i < x.size(); ++i) {
          m.push_back(x[i] - n.a);
          m.push_back(x[i] - n.c);
        }
        break;
      }
      case Op::ReduceMin: {
        const Tensor& x = v[n.operands[0]];
        std::size_t segs = n.segments == 0 ? 1 : n.segments;
        std::vector<double> lo(segs, std::numeric_limits<double>::infinity());
        std::vector<double> lo2(segs, std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < x.size(); ++i) {
          std::size_t s = n.segments == 0 ? 0 : n.indices[i];
          if (x[i] < lo[s]) {
            lo2[s] = lo[s];
            lo[s] = x[i];
          } else if (x[i] < lo2[s]) {
            lo2[s] = x[i];
          }
        }
        for (std::size_t s = 0; s < segs; ++s)
          m.push_back(std::isfinite(lo2[s]) ? lo2[s] - lo[s] : 1.0);
        break;
      }
      default:
        break;
    }
  }
  return m;
}

}  // namespace

GradCheckReport finite_difference_report(const Graph& g, NodeId output, const Bindings& at,
                                         double eps) {
  if (!(eps > 0)) throw OutOfRange("finite-difference step must be positive");
  Values base = evaluate_forward(g, at);
  Gradients analytic = backward_gradients(g, output, base);
  std::vector<double> m0 = kink_margins(g, base);

  GradCheckReport rep;
  Bindings probe = at;
  for (NodeId p : g.params()) {
    Tensor& theta = probe.at(p);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      double orig = theta[i];
      theta[i] = orig + eps;
      Values vp = evaluate_forward(g, probe);
      theta[i] = orig - eps;
      Values vm = evaluate_forward(g, probe);
      theta[i] = orig;

      std::vector<double> mp = kink_margins(g, vp);
      std::vector<double> mm = kink_margins(g, vm);
      bool near_kink = false;
      for (std::size_t j = 0; j < m0.size() && !near_kink; ++j) {
        bool moved = mp[j] != mm[j] || mp[j] != m0[j];
        if (!moved) continue;
        double closest = std::min({std::abs(m0[j]), std::abs(mp[j]), std::abs(mm[j])});
        bool crossed = (mp[j] > 0) != (mm[j] > 0) || (mp[j] > 0) != (m0[j] > 0);
        if (closest < 10 * eps || crossed) near_kink = true;
      }
      if (near_kink) {
        ++rep.skipped;
        continue;
      }
      double numeric = (vp[output].item() - vm[output].item()) / (2 * eps);
      double err = std::abs(analytic.at(p)[i] - numeric) / std::max(1.0, std::abs(numeric));
      rep.max_error = std::max(rep.max_error, err);
      ++rep.checked;
    }
  }
  return rep;
}

double finite_difference_check(const Graph& g, NodeId output, const Bindings& at, double eps) {
  return finite_difference_report(g, output, at, eps).max_error;
}

}  // namespace ltn::ad
