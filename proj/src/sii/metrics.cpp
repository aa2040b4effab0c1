#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ltn/error.hpp"
#include "ltn/sii.hpp"

namespace ltn::sii {

PrCurve pr_auc(const std::vector<std::pair<double, bool>>& scored) {
  std::size_t positives = 0;
  for (const auto& [s, truth] : scored) {
    if (!std::isfinite(s)) throw InvalidSpec("non-finite score");
    positives += truth;
  }
  if (positives == 0) throw NoPositives("precision/recall needs at least one positive");
  auto sorted = scored;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  PrCurve c;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    double th = sorted[i].first;
    for (; i < sorted.size() && sorted[i].first == th; ++i) (sorted[i].second ? tp : fp)++;
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = static_cast<double>(tp) / static_cast<double>(positives);
    c.points.push_back({th, precision, recall});
  }
  double prev_recall = 0.0, prev_precision = c.points.front().precision;
  for (const auto& p : c.points) {
    c.auc += (p.recall - prev_recall) * (p.precision + prev_precision) / 2.0;
    prev_recall = p.recall;
    prev_precision = p.precision;
  }
  return c;
}

std::string pr_csv(const PrCurve& c) {
  std::string out = "threshold,precision,recall\n";
  char buf[96];
  for (const auto& p : c.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.precision, p.recall);
    out += buf;
  }
  return out;
}

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Counts count_at(const std::vector<std::pair<double, bool>>& scored, double th) {
  Counts c;
  for (const auto& [s, truth] : scored) {
    bool predicted = s >= th;
    (predicted ? (truth ? c.tp : c.fp) : (truth ? c.fn : c.tn))++;
  }
  return c;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double accuracy_at(const std::vector<std::pair<double, bool>>& scored, double th) {
  auto c = count_at(scored, th);
  return ratio(c.tp + c.tn, scored.size());
}

double precision_at(const std::vector<std::pair<double, bool>>& scored, double th) {
  auto c = count_at(scored, th);
  return ratio(c.tp, c.tp + c.fp);
}

double recall_at(const std::vector<std::pair<double, bool>>& scored, double th) {
  auto c = count_at(scored, th);
  return ratio(c.tp, c.tp + c.fn);
}

ScoreSet baseline_scores(const Dataset& ds, const std::vector<std::size_t>& boxes,
                         const PartOntology& onto) {
  ScoreSet out;
  for (std::size_t i : boxes) {
    const auto& b = ds.boxes[i];
    if (!b.label) throw MissingLabels("box '" + b.id + "' has no label");
    for (std::size_t c = 0; c < ds.classes.size(); ++c)
      out.types.emplace_back(b.scores[c], *b.label == ds.classes[c]);
  }
  for (auto [i, j] : ds.same_image_pairs(boxes))
    out.partof.emplace_back(baseline_partof_score(ds.boxes[i], ds.boxes[j], onto, ds.classes),
                            ds.is_part(i, j));
  return out;
}

ScoreSet ltn_scores(const Dataset& ds, const std::vector<std::size_t>& boxes,
                    const ad::ParamStore& params, const GroundingConfig& cfg) {
  ScoreSet out;
  if (boxes.empty()) return out;
  GroundedTheory t;
  t.kb.signature = sii_signature(ds.classes);
  t.grounding = cfg;
  t.params = params;
  std::vector<std::vector<std::string>> singles;
  for (std::size_t i : boxes) {
    const auto& b = ds.boxes[i];
    if (!b.label) throw MissingLabels("box '" + b.id + "' has no label");
    t.kb.signature.add_constant(b.id);
    t.fixed_constants[b.id] = feature_vector(b);
    singles.push_back({b.id});
  }
  t.check();

  ad::Graph g;
  FormulaCompiler compiler(t, g);
  std::vector<ad::NodeId> class_nodes;
  for (const auto& c : ds.classes) class_nodes.push_back(compiler.compile_literals(c, singles, false));
  auto pairs = ds.same_image_pairs(boxes);
  std::vector<std::vector<std::string>> pair_args;
  for (auto [i, j] : pairs) pair_args.push_back({ds.boxes[i].id, ds.boxes[j].id});
  ad::NodeId pair_node = pairs.empty() ? kNoNode : compiler.compile_literals(kPartOf, pair_args, false);
  auto values = ad::evaluate_forward(g, compiler.bindings());

  for (std::size_t r = 0; r < boxes.size(); ++r) {
    const auto& b = ds.boxes[boxes[r]];
    for (std::size_t c = 0; c < ds.classes.size(); ++c)
      out.types.emplace_back(std::clamp(values[class_nodes[c]][r], 0.0, 1.0),
                             *b.label == ds.classes[c]);
  }
  for (std::size_t p = 0; p < pairs.size(); ++p)
    out.partof.emplace_back(std::clamp(values[pair_node][p], 0.0, 1.0),
                            ds.is_part(pairs[p].first, pairs[p].second));
  return out;
}

}  // namespace ltn::sii
