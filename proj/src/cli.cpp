#include "ltn/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>

#include "ltn/error.hpp"
#include "ltn/parser.hpp"
#include "ltn/sii.hpp"
#include "ltn/skolem.hpp"

namespace ltn::cli {

namespace {

namespace fs = std::filesystem;
using namespace ltn::sii;

std::string decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Symbols a checkpoint carries beyond the class predicates and partOf.
Json extra_signature(const Signature& full, const std::vector<std::string>& classes,
                     const std::set<std::string>& boxes) {
  Signature base = sii_signature(classes);
  Json j{{"constants", Json::array()}, {"functions", Json::object()}, {"predicates", Json::object()}};
  for (const auto& c : full.constants)
    if (!boxes.count(c)) j["constants"].push_back(c);
  for (const auto& [f, a] : full.functions) j["functions"][f] = a;
  for (const auto& [p, a] : full.predicates)
    if (!base.is_predicate(p)) j["predicates"][p] = a;
  return j;
}

Signature signature_from(const Json& meta) {
  Signature sig = sii_signature(meta.at("classes").get<std::vector<std::string>>());
  const Json& extra = meta.at("extra_signature");
  for (const auto& c : extra.at("constants")) sig.add_constant(c.get<std::string>());
  for (const auto& [f, a] : extra.at("functions").items()) sig.add_function(f, a.get<int>());
  for (const auto& [p, a] : extra.at("predicates").items()) sig.add_predicate(p, a.get<int>());
  return sig;
}

// ∃x φ becomes ¬∀x¬φ: a query has no learned grounding for fresh Skolem symbols.
Formula dualize_exists(const Formula& f) {
  using K = Formula::Kind;
  switch (f.kind()) {
    case K::Atom:
      return f;
    case K::Not:
      return Formula::negation(dualize_exists(f.lhs()));
    case K::And:
    case K::Or:
    case K::Implies:
      return Formula::binary(f.kind(), dualize_exists(f.lhs()), dualize_exists(f.rhs()));
    case K::Forall:
      return Formula::forall(f.name(), dualize_exists(f.body()));
    case K::Exists:
      return Formula::negation(
          Formula::forall(f.name(), Formula::negation(dualize_exists(f.body()))));
  }
  return f;
}

void check_threads() {
  const char* v = std::getenv("LTN_THREADS");
  if (!v) return;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n < 1)
    throw InvalidSpec("LTN_THREADS must be a positive integer, got '" + std::string(v) + "'");
}

void require_distinct(const std::string& in, const std::string& out) {
  std::error_code ec;
  if (fs::exists(out) && fs::equivalent(in, out, ec))
    throw InvalidSpec("refusing to overwrite the input file '" + in + "'");
}

void check_classes(const Json& meta, const Dataset& ds) {
  if (meta.value("format", "") != "sii" ||
      meta.at("classes").get<std::vector<std::string>>() != ds.classes)
    throw SignatureMismatch("checkpoint was trained on a different class signature");
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  SynthSpec spec;
  std::optional<std::uint64_t> seed;
  std::string out, ontology_out;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  auto r = synth_dataset(a.spec, *a.seed);
  write_file(a.out, serialize_dataset(r.dataset));
  if (!a.ontology_out.empty()) write_file(a.ontology_out, canonical_json(r.ontology.to_json(), 2) + "\n");
  out << "boxes " << r.dataset.boxes.size() << "\n";
}

struct NoiseArgs {
  std::string data, out;
  double k = 0;
  std::optional<std::uint64_t> seed;
};

void cmd_noise(const NoiseArgs& a, std::ostream& out) {
  require_distinct(a.data, a.out);
  Dataset ds = load_dataset(a.data);
  Dataset noisy = inject_noise(ds, a.k, *a.seed);
  write_file(a.out, serialize_dataset(noisy));
  std::size_t relabeled = 0;
  for (std::size_t i = 0; i < ds.boxes.size(); ++i) relabeled += ds.boxes[i].label != noisy.boxes[i].label;
  out << "relabeled " << relabeled << "\n";
}

struct TrainArgs {
  std::string data, ontology, kb, checkpoint, report;
  std::string mode = "prior", tnorm = "lukasiewicz", aggregator = "mean:-1", objective = "grouped";
  std::size_t epochs = 1000, k = 6, max_negatives = 0;
  double lambda = 1e-10, lr = 0.01;
  std::optional<std::uint64_t> seed;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  Dataset ds = load_dataset(a.data);
  PartOntology onto = PartOntology::from_json(read_json_file(a.ontology));
  TheoryConfig tc;
  tc.k = a.k;
  tc.logic.tnorm = parse_tnorm(a.tnorm);
  tc.logic.aggregator = Aggregator::parse(a.aggregator);
  tc.seed = *a.seed;
  tc.max_negative_pairs_per_image = a.max_negatives;
  TheoryMode mode = parse_mode(a.mode);
  GroundedTheory t = build_theory(ds, onto, mode, tc);
  std::size_t literals = t.kb.formulas.size() - (mode == TheoryMode::Prior ? generate_mereology(onto).size() : 0);

  std::set<std::string> boxes(t.kb.signature.constants.begin(), t.kb.signature.constants.end());
  if (!a.kb.empty()) {
    KnowledgeBase extra = skolemize_kb(load_kb(a.kb));
    Signature merged = t.kb.signature.merged(extra.signature);
    Signature fresh;
    std::set<std::string> fresh_constants;
    for (const auto& [f, arity] : merged.functions) fresh.add_function(f, arity);
    for (const auto& [p, arity] : merged.predicates)
      if (!t.kb.signature.is_predicate(p)) fresh.add_predicate(p, arity);
    for (const auto& c : merged.constants)
      if (!boxes.count(c)) {
        fresh.add_constant(c);
        fresh_constants.insert(c);
      }
    for (auto& [key, tensor] : init_parameters(t.grounding, fresh, *a.seed + 1, fresh_constants))
      t.params.emplace(key, std::move(tensor));
    t.kb.signature = merged;
    for (const auto& f : extra.formulas) t.kb.formulas.push_back(f);
    t.check();
  }

  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.lambda = a.lambda;
  cfg.learning_rate = a.lr;
  cfg.seed = *a.seed;
  cfg.objective = parse_objective(a.objective);
  cfg.check();
  TrainReport rep = train(t, cfg);

  Checkpoint ck;
  ck.params = t.params;
  ck.meta = {{"format", "sii"},
             {"classes", ds.classes},
             {"extra_signature", extra_signature(t.kb.signature, ds.classes, boxes)},
             {"n", t.grounding.n},
             {"k", t.grounding.k},
             {"mode", a.mode},
             {"tnorm", to_string(tc.logic.tnorm)},
             {"aggregator", tc.logic.aggregator.str()},
             {"objective", to_string(cfg.objective)},
             {"epochs", cfg.epochs},
             {"lambda", cfg.lambda},
             {"learning_rate", cfg.learning_rate},
             {"seed", cfg.seed},
             {"satisfiability", rep.final_satisfiability}};
  save_checkpoint(a.checkpoint, ck);
  if (!a.report.empty()) {
    Json j = rep.to_json(t.kb);
    j["mode"] = a.mode;
    j["counts"] = {{"formulas", t.kb.formulas.size()},
                   {"literals", literals},
                   {"axioms", t.kb.formulas.size() - literals}};
    write_file(a.report, canonical_json(j, 2) + "\n");
  }
  out << "formulas " << t.kb.formulas.size() << "\n";
  out << "satisfiability " << decimal(rep.final_satisfiability) << "\n";
}

struct EvalArgs {
  std::string checkpoint, data, ontology, out_dir, split = "test";
  double th = 0.7;
};

Json curve_summary(const std::vector<std::pair<double, bool>>& scored, double th,
                   const fs::path& csv) {
  Json j{{"count", scored.size()}};
  try {
    PrCurve c = pr_auc(scored);
    write_file(csv.string(), pr_csv(c));
    j["auc"] = c.auc;
  } catch (const NoPositives&) {
    write_file(csv.string(), pr_csv({}));
    j["auc"] = nullptr;
  }
  j["precision"] = precision_at(scored, th);
  j["recall"] = recall_at(scored, th);
  j["accuracy"] = accuracy_at(scored, th);
  return j;
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  Dataset ds = load_dataset(a.data);
  check_classes(ck.meta, ds);
  PartOntology onto = PartOntology::from_json(read_json_file(a.ontology));
  if (!(a.th >= 0.0 && a.th <= 1.0)) throw InvalidSpec("threshold must lie in [0, 1]");
  std::vector<std::size_t> idx;
  if (a.split == "all") {
    for (std::size_t i = 0; i < ds.boxes.size(); ++i) idx.push_back(i);
  } else if (a.split == "test" || a.split == "train") {
    idx = ds.split_indices(a.split == "test");
  } else {
    throw InvalidSpec("split must be test, train or all");
  }
  if (idx.empty()) throw InvalidSpec("the " + a.split + " split is empty");

  GroundingConfig g{ck.meta.at("n").get<std::size_t>(), ck.meta.at("k").get<std::size_t>()};
  ScoreSet ltn = ltn_scores(ds, idx, ck.params, g);
  ScoreSet base = baseline_scores(ds, idx, onto);
  std::size_t argmax_hits = 0;
  for (std::size_t i : idx) argmax_hits += ds.classes[baseline_type(ds.boxes[i].scores)] == *ds.boxes[i].label;

  fs::path dir(a.out_dir);
  fs::create_directories(dir);
  Json m{{"split", a.split}, {"boxes", idx.size()}, {"threshold", a.th}};
  m["ltn"] = {{"types", curve_summary(ltn.types, a.th, dir / "ltn_types.csv")},
              {"partof", curve_summary(ltn.partof, a.th, dir / "ltn_partof.csv")}};
  m["onevsall_types"] = curve_summary(base.types, a.th, dir / "onevsall_types.csv");
  m["onevsall_types"]["argmax_accuracy"] = static_cast<double>(argmax_hits) / static_cast<double>(idx.size());
  m["geometric_partof"] = curve_summary(base.partof, a.th, dir / "geometric_partof.csv");
  write_file((dir / "metrics.json").string(), canonical_json(m, 2) + "\n");

  auto auc = [](const Json& j) { return j.at("auc").is_null() ? std::string("n/a") : decimal(j.at("auc").get<double>()); };
  out << "ltn types auc " << auc(m["ltn"]["types"]) << "\n";
  out << "ltn partof auc " << auc(m["ltn"]["partof"]) << "\n";
  out << "onevsall types auc " << auc(m["onevsall_types"]) << "\n";
  out << "geometric partof auc " << auc(m["geometric_partof"]) << "\n";
}

struct QueryArgs {
  std::string checkpoint, data, formula;
};

void cmd_query(const QueryArgs& a, std::ostream& out) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  Dataset ds = load_dataset(a.data);
  check_classes(ck.meta, ds);
  GroundedTheory t;
  t.kb.signature = signature_from(ck.meta);
  t.grounding = {ck.meta.at("n").get<std::size_t>(), ck.meta.at("k").get<std::size_t>()};
  t.logic.tnorm = parse_tnorm(ck.meta.at("tnorm").get<std::string>());
  t.logic.aggregator = Aggregator::parse(ck.meta.at("aggregator").get<std::string>());
  t.params = ck.params;
  for (const auto& b : ds.boxes) {
    t.kb.signature.add_constant(b.id);
    t.fixed_constants[b.id] = feature_vector(b);
    t.domain.group_of[b.id] = b.image;
  }
  t.domain.distinct = true;
  Formula f = parse_formula(a.formula, t.kb.signature);
  if (!is_closed(f)) throw NotClosed("query '" + a.formula + "' has free variables");
  f = skolemize(dualize_exists(f), t.kb.signature).formula;
  t.kb.formulas = {f};
  t.check();
  out << decimal(query(t, f)) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Logic tensor networks for semantic image interpretation", "ltn"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic box dataset");
  synth->add_option("--classes", sa.spec.wholes, "Whole classes (as many part classes)");
  synth->add_option("--images", sa.spec.images, "Number of images");
  synth->add_option("--per-image", sa.spec.wholes_per_image, "Wholes per image");
  synth->add_option("--sigma", sa.spec.sigma, "Detector score noise");
  synth->add_option("--contradictions", sa.spec.contradiction_rate,
                    "Share of part boxes nested in a whole they are not part of");
  synth->add_option("--image-size", sa.spec.image_size, "Image side in pixels");
  synth->add_option("--seed", sa.seed, "Random seed")->required();
  synth->add_option("--out", sa.out, "Dataset file (JSON lines)")->required();
  synth->add_option("--ontology-out", sa.ontology_out, "Ontology file (JSON)");

  NoiseArgs na;
  auto* noise = app.add_subcommand("noise", "Relabel boxes and flip partOf bits");
  noise->add_option("--data", na.data, "Input dataset")->required()->check(CLI::ExistingFile);
  noise->add_option("--out", na.out, "Output dataset")->required();
  noise->add_option("--k", na.k, "Noise level in percent")->required();
  noise->add_option("--seed", na.seed, "Random seed")->required();

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Learn groundings for T_expl or T_prior");
  trainc->add_option("--data", ta.data, "Dataset")->required()->check(CLI::ExistingFile);
  trainc->add_option("--ontology", ta.ontology, "Part ontology")->required()->check(CLI::ExistingFile);
  trainc->add_option("--kb", ta.kb, "Extra axioms")->check(CLI::ExistingFile);
  trainc->add_option("--mode", ta.mode, "expl or prior");
  trainc->add_option("--epochs", ta.epochs, "Training epochs");
  trainc->add_option("--tnorm", ta.tnorm, "lukasiewicz, product or goedel");
  trainc->add_option("--aggregator", ta.aggregator, "mean:<p> or min");
  trainc->add_option("--objective", ta.objective, "grouped or conjunction");
  trainc->add_option("--k", ta.k, "Tensor layers per predicate");
  trainc->add_option("--lambda", ta.lambda, "L2 regularization");
  trainc->add_option("--lr", ta.lr, "RMSProp learning rate");
  trainc->add_option("--max-negatives", ta.max_negatives, "Negative partOf literals per image (0 = all)");
  trainc->add_option("--seed", ta.seed, "Random seed")->required();
  trainc->add_option("--checkpoint", ta.checkpoint, "Checkpoint to write")->required();
  trainc->add_option("--report", ta.report, "JSON report to write");

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "Precision/recall of the LTN and the baselines");
  evalc->add_option("--checkpoint", ea.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  evalc->add_option("--data", ea.data, "Dataset")->required()->check(CLI::ExistingFile);
  evalc->add_option("--ontology", ea.ontology, "Part ontology")->required()->check(CLI::ExistingFile);
  evalc->add_option("--out", ea.out_dir, "Output directory")->required();
  evalc->add_option("--split", ea.split, "test, train or all");
  evalc->add_option("--th", ea.th, "Classification threshold");

  QueryArgs qa;
  auto* queryc = app.add_subcommand("query", "Truth of a closed formula under a checkpoint");
  queryc->add_option("--checkpoint", qa.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  queryc->add_option("--data", qa.data, "Dataset holding the boxes")->required()->check(CLI::ExistingFile);
  queryc->add_option("formula", qa.formula, "Formula")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return 2;
  }

  try {
    check_threads();
    if (*synth) cmd_synth(sa, out);
    if (*noise) cmd_noise(na, out);
    if (*trainc) cmd_train(ta, out);
    if (*evalc) cmd_eval(ea, out);
    if (*queryc) cmd_query(qa, out);
    return 0;
  } catch (const NonFiniteValue& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed file: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ltn::cli
