#include "ltn/grounding.hpp"

#include <cmath>
#include <numbers>

#include "ltn/error.hpp"

namespace ltn {

void GroundingConfig::check() const {
  if (n < 1) throw OutOfRange("embedding dimension n must be >= 1");
  if (k < 1) throw OutOfRange("tensor layers k must be >= 1");
}

namespace {

Vec concat_args(const std::vector<Vec>& args, std::size_t expected_len) {
  Vec v;
  for (const auto& a : args) v.insert(v.end(), a.begin(), a.end());
  if (v.size() != expected_len)
    throw ShapeMismatch("concatenated arguments have length " + std::to_string(v.size()) +
                        ", grounding expects " + std::to_string(expected_len));
  return v;
}

void check_equal_lengths(const std::vector<Vec>& args) {
  for (const auto& a : args)
    if (a.size() != args.front().size())
      throw ShapeMismatch("arguments have different lengths");
}

}  // namespace

std::vector<double> apply_function(const FunctionGrounding& fg, const std::vector<Vec>& args) {
  if (fg.M.rank() != 2 || fg.N.rank() != 1 || fg.N.size() != fg.M.dim(0))
    throw ShapeMismatch("function grounding has shapes M " + ad::shape_string(fg.M.shape()) +
                        ", N " + ad::shape_string(fg.N.shape()));
  if (args.empty()) throw ShapeMismatch("function applied to no arguments");
  check_equal_lengths(args);
  std::size_t n = fg.M.dim(0), mn = fg.M.dim(1);
  if (args.front().size() != n)
    throw ShapeMismatch("argument length " + std::to_string(args.front().size()) +
                        " differs from n = " + std::to_string(n));
  Vec v = concat_args(args, mn);
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = fg.N[i];
    for (std::size_t j = 0; j < mn; ++j) s += fg.M[i * mn + j] * v[j];
    out[i] = s;
  }
  return out;
}

double apply_predicate(const PredicateGrounding& pg, const std::vector<Vec>& args) {
  if (pg.W.rank() != 3 || pg.V.rank() != 2)
    throw ShapeMismatch("predicate grounding has shapes W " + ad::shape_string(pg.W.shape()) +
                        ", V " + ad::shape_string(pg.V.shape()));
  std::size_t k = pg.W.dim(0), mn = pg.W.dim(1);
  if (pg.W.dim(2) != mn || pg.V.dim(0) != k || pg.V.dim(1) != mn || pg.b.shape() != ad::Shape{k} ||
      pg.u.shape() != ad::Shape{k})
    throw ShapeMismatch("inconsistent predicate grounding blocks");
  if (args.empty()) throw ShapeMismatch("predicate applied to no arguments");
  check_equal_lengths(args);
  Vec v = concat_args(args, mn);
  double z = 0;
  for (std::size_t s = 0; s < k; ++s) {
    double q = 0;
    for (std::size_t i = 0; i < mn; ++i)
      for (std::size_t j = 0; j < mn; ++j) q += v[i] * pg.W[(s * mn + i) * mn + j] * v[j];
    double lin = 0;
    for (std::size_t i = 0; i < mn; ++i) lin += pg.V[s * mn + i] * v[i];
    z += pg.u[s] * std::tanh(q + lin + pg.b[s]);
  }
  return 1.0 / (1.0 + std::exp(-z));
}

std::string predicate_key(const std::string& pred, const char* block) {
  return "pred/" + pred + "/" + block;
}
std::string function_key(const std::string& func, const char* block) {
  return "func/" + func + "/" + block;
}
std::string constant_key(const std::string& constant) { return "const/" + constant + "/vec"; }

namespace {
const ad::Tensor& lookup(const ad::ParamStore& store, const std::string& key) {
  auto it = store.find(key);
  if (it == store.end()) throw UngroundedSymbol("no parameter '" + key + "'");
  return it->second;
}
}  // namespace

PredicateGrounding predicate_grounding(const ad::ParamStore& store, const std::string& pred) {
  return {lookup(store, predicate_key(pred, "W")), lookup(store, predicate_key(pred, "V")),
          lookup(store, predicate_key(pred, "b")), lookup(store, predicate_key(pred, "u"))};
}

FunctionGrounding function_grounding(const ad::ParamStore& store, const std::string& func) {
  return {lookup(store, function_key(func, "M")), lookup(store, function_key(func, "N"))};
}

double Rng::uniform(double lo, double hi) {
  // 53 random mantissa bits -> [0, 1).
  double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

std::uint64_t Rng::index(std::uint64_t bound) {
  if (bound == 0) throw OutOfRange("empty index range");
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    std::uint64_t r = engine_();
    if (r < limit) return r % bound;
  }
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0;
  while (u1 <= 0) u1 = uniform(0, 1);
  double u2 = uniform(0, 1);
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2 * std::numbers::pi * u2);
}

ad::ParamStore init_parameters(const GroundingConfig& cfg, const Signature& sig,
                               std::uint64_t seed,
                               const std::set<std::string>& learnable_constants) {
  cfg.check();
  Rng rng(seed);
  ad::ParamStore store;
  auto draw = [&](ad::Shape shape) {
    ad::Tensor t(std::move(shape));
    for (auto& x : t.storage()) x = rng.uniform(-0.1, 0.1);
    return t;
  };
  const std::size_t n = cfg.n, k = cfg.k;
  for (const auto& [p, arity] : sig.predicates) {
    std::size_t mn = static_cast<std::size_t>(arity) * n;
    store[predicate_key(p, "W")] = draw({k, mn, mn});
    store[predicate_key(p, "V")] = draw({k, mn});
    store[predicate_key(p, "b")] = draw({k});
    store[predicate_key(p, "u")] = draw({k});
  }
  for (const auto& [f, arity] : sig.functions) {
    store[function_key(f, "M")] = draw({n, static_cast<std::size_t>(arity) * n});
    store[function_key(f, "N")] = draw({n});
  }
  for (const auto& c : learnable_constants) {
    if (!sig.is_constant(c)) throw UnknownSymbol("constant '" + c + "' is not declared");
    store[constant_key(c)] = draw({n});
  }
  return store;
}

PredicateNodes declare_predicate(ad::Graph& g, const std::string& pred, std::size_t arity,
                                 const GroundingConfig& cfg) {
  std::size_t mn = arity * cfg.n, k = cfg.k;
  return {g.param(predicate_key(pred, "W"), {k, mn, mn}), g.param(predicate_key(pred, "V"), {k, mn}),
          g.param(predicate_key(pred, "b"), {k}), g.param(predicate_key(pred, "u"), {k})};
}

FunctionNodes declare_function(ad::Graph& g, const std::string& func, std::size_t arity,
                               const GroundingConfig& cfg) {
  return {g.param(function_key(func, "M"), {cfg.n, arity * cfg.n}),
          g.param(function_key(func, "N"), {cfg.n})};
}

ad::NodeId predicate_node(ad::Graph& g, const PredicateNodes& p, ad::NodeId v) {
  const ad::Shape& s = g.node(v).shape;
  if (s.size() == 1) {
    ad::NodeId pre = g.add(g.add(g.bilinear(v, p.W, v), g.matmul(p.V, v)), p.b);
    ad::NodeId h = g.concat({g.tanh(pre)}, 0);  // [1, k]
    return g.sigmoid(g.matmul(h, p.u));
  }
  if (s.size() != 2) throw ShapeMismatch("predicate input " + ad::shape_string(s));
  std::size_t rows = s[0];
  ad::NodeId pre = g.add(g.add(g.bilinear(v, p.W, v), g.matmul(v, p.V, true)),
                         g.row_broadcast(p.b, rows));
  return g.sigmoid(g.matmul(g.tanh(pre), p.u));
}

ad::NodeId function_node(ad::Graph& g, const FunctionNodes& f, ad::NodeId v) {
  const ad::Shape& s = g.node(v).shape;
  if (s.size() == 1) return g.add(g.matmul(f.M, v), f.N);
  if (s.size() != 2) throw ShapeMismatch("function input " + ad::shape_string(s));
  return g.add(g.matmul(v, f.M, true), g.row_broadcast(f.N, s[0]));
}

}  // namespace ltn
