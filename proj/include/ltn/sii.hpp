#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ltn/ast.hpp"
#include "ltn/io.hpp"
#include "ltn/learn.hpp"

// Semantic image interpretation on detector bounding boxes.
namespace ltn::sii {

inline constexpr const char* kPartOf = "partOf";
inline constexpr double kMinSidePixels = 6.0;

struct BoundingBox {
  std::string id;
  std::string image;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixels
  std::vector<double> scores;             // one per class, in [0, 1]
  std::optional<std::string> label;
  // Boxes this box is a part of: partOf(id, parent).
  std::vector<std::string> parents;
  double image_width = 1.0, image_height = 1.0;
  std::string split;  // "train", "test" or empty (treated as train)

  double area() const { return (x1 - x0) * (y1 - y0); }
  bool is_test() const { return split == "test"; }
};

struct PartOntology {
  std::set<std::string> wholes;
  std::set<std::string> parts;
  std::set<std::pair<std::string, std::string>> pairs;  // (part, whole)

  std::vector<std::string> parts_of(const std::string& whole) const;
  bool is_part_of(const std::string& part, const std::string& whole) const {
    return pairs.count({part, whole}) != 0;
  }
  void check() const;  // EmptyOntology / InvalidSpec

  static PartOntology from_json(const Json& j);
  Json to_json() const;
};

struct Dataset {
  std::vector<std::string> classes;
  std::vector<BoundingBox> boxes;

  std::size_t class_index(const std::string& name) const;  // throws UnknownSymbol
  std::size_t box_index(const std::string& id) const;      // throws UnknownSymbol
  std::vector<std::size_t> split_indices(bool test) const;
  // Ordered same-image pairs (i, j), i != j, both in `indices`.
  std::vector<std::pair<std::size_t, std::size_t>> same_image_pairs(
      const std::vector<std::size_t>& indices) const;
  bool is_part(std::size_t part, std::size_t whole) const;
};

// JSON-lines: an optional header {"classes": [...]} followed by one box per
// line {id, image, box: [x0,y0,x1,y1], scores, label?, parent?, size?, split?}.
// `parent` is a box id, or an array of ids. Boxes with a side under 6 pixels
// are dropped. Without a header `classes` must be supplied.
Dataset parse_dataset(const std::string& text, std::vector<std::string> classes = {});
Dataset load_dataset(const std::string& path, std::vector<std::string> classes = {});
std::string serialize_dataset(const Dataset& ds);

// ⟨scores, x0/W, y0/H, x1/W, y1/H⟩.
std::vector<double> feature_vector(const BoundingBox& b);
// area(b ∩ b') / area(b).
double inclusion_ratio(const BoundingBox& b, const BoundingBox& other);

// Index of the largest score; ties go to the lowest index.
std::size_t baseline_type(const std::vector<double>& scores);
// ir(b, b') · max_ij w_ij x_i x'_j for "b is a part of b'".
double baseline_partof_score(const BoundingBox& part, const BoundingBox& whole,
                             const PartOntology& onto, const std::vector<std::string>& classes);
bool baseline_partof(const BoundingBox& part, const BoundingBox& whole, const PartOntology& onto,
                     const std::vector<std::string>& classes, double th_ir = 0.7);

// Mereological axioms under partOf(part, whole): asymmetry; for each whole its
// part inventory; wholes are not parts; parts have no parts.
std::vector<Formula> generate_mereology(const PartOntology& onto);

enum class TheoryMode { Expl, Prior };
TheoryMode parse_mode(const std::string& s);  // expl | prior

struct TheoryConfig {
  std::size_t k = 6;
  LogicConfig logic;
  std::uint64_t seed = 0;
  // Negative partOf literals kept per image (0 keeps all).
  std::size_t max_negative_pairs_per_image = 0;
};

// The signature shared by theories and checkpoints: one unary predicate per
// class plus binary partOf.
Signature sii_signature(const std::vector<std::string>& classes);

// T_expl: type literals (positive and one-vs-all negative) for every training
// box, then partOf / ¬partOf for every ordered same-image training pair.
// T_prior appends generate_mereology(onto). Box vectors are fixed, predicate
// groundings learnable, quantifiers range over same-image tuples.
GroundedTheory build_theory(const Dataset& ds, const PartOntology& onto, TheoryMode mode,
                            const TheoryConfig& cfg);

// Relabels floor(k% of training boxes) and flips floor(k% of ordered
// same-image training pairs); test boxes untouched.
Dataset inject_noise(const Dataset& ds, double k_percent, std::uint64_t seed);

struct SynthSpec {
  std::size_t wholes = 4;            // whole classes; as many part classes
  std::size_t images = 20;
  std::size_t wholes_per_image = 2;
  double sigma = 0.1;                // detector score noise
  double contradiction_rate = 0.0;   // share of part boxes nested in a whole they are not part of
  double image_size = 256.0;
  void check() const;
};

struct SynthResult {
  Dataset dataset;
  PartOntology ontology;
};

// Whole i has parts part_i and part_{(i+1) mod N}. A true part straddles the
// top edge of its whole with ir in [0.8, 0.95]. A contradicting part lies
// fully inside the whole's bottom band (ir = 1) but has no parent, so
// geometry alone ranks it above every true part. Splits 80/20 by image.
SynthResult synth_dataset(const SynthSpec& spec, std::uint64_t seed);

// Assigns whole images to train/test, about `test_fraction` of boxes to test.
Dataset split_by_image(const Dataset& ds, double test_fraction, std::uint64_t seed);

struct PrPoint {
  double threshold, precision, recall;
};
struct PrCurve {
  std::vector<PrPoint> points;
  double auc = 0.0;
};

// Thresholds are the distinct scores; a leading point at recall 0 carries
// the precision of the highest threshold. AUC by trapezoids over recall.
PrCurve pr_auc(const std::vector<std::pair<double, bool>>& scored);
std::string pr_csv(const PrCurve& c);

// Soft scores for evaluation.
struct ScoreSet {
  std::vector<std::pair<double, bool>> types;   // (box, class) pairs pooled
  std::vector<std::pair<double, bool>> partof;  // ordered same-image pairs
};

// Detector scores as type scores, geometric soft scores for partOf.
ScoreSet baseline_scores(const Dataset& ds, const std::vector<std::size_t>& boxes,
                         const PartOntology& onto);
// Learned predicate truths for the given boxes.
ScoreSet ltn_scores(const Dataset& ds, const std::vector<std::size_t>& boxes,
                    const ad::ParamStore& params, const GroundingConfig& cfg);

double accuracy_at(const std::vector<std::pair<double, bool>>& scored, double th);
double precision_at(const std::vector<std::pair<double, bool>>& scored, double th);
double recall_at(const std::vector<std::pair<double, bool>>& scored, double th);

}  // namespace ltn::sii
