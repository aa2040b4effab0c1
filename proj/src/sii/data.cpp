#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "ltn/error.hpp"
#include "ltn/parser.hpp"
#include "ltn/sii.hpp"

namespace ltn::sii {

namespace {

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return !is_reserved_word(s);
}

std::vector<std::string> string_list(const Json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string(what) + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw FormatError(std::string(what) + " must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw FormatError(what + " must be a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw FormatError(what + " must be finite");
  return v;
}

BoundingBox parse_box(const Json& j, std::size_t line) {
  std::string where = "line " + std::to_string(line) + ": ";
  if (!j.is_object()) throw FormatError(where + "expected a JSON object");
  BoundingBox b;
  if (!j.contains("id") || !j["id"].is_string()) throw FormatError(where + "missing string 'id'");
  b.id = j["id"].get<std::string>();
  if (!j.contains("image")) throw FormatError(where + "missing 'image'");
  b.image = j["image"].is_string() ? j["image"].get<std::string>() : j["image"].dump();
  if (!j.contains("box") || !j["box"].is_array() || j["box"].size() != 4)
    throw FormatError(where + "'box' must be [x0, y0, x1, y1]");
  b.x0 = number(j["box"][0], where + "box");
  b.y0 = number(j["box"][1], where + "box");
  b.x1 = number(j["box"][2], where + "box");
  b.y1 = number(j["box"][3], where + "box");
  if (!(b.x1 > b.x0) || !(b.y1 > b.y0))
    throw FormatError(where + "box corners must satisfy x1 > x0 and y1 > y0");
  if (!j.contains("scores") || !j["scores"].is_array())
    throw FormatError(where + "missing 'scores' array");
  for (const auto& s : j["scores"]) {
    double v = number(s, where + "score");
    if (v < 0.0 || v > 1.0) throw FormatError(where + "scores must lie in [0, 1]");
    b.scores.push_back(v);
  }
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_string()) throw FormatError(where + "'label' must be a string");
    b.label = j["label"].get<std::string>();
  }
  if (j.contains("parent") && !j["parent"].is_null()) {
    if (j["parent"].is_string())
      b.parents.push_back(j["parent"].get<std::string>());
    else
      b.parents = string_list(j["parent"], "'parent'");
    std::sort(b.parents.begin(), b.parents.end());
    b.parents.erase(std::unique(b.parents.begin(), b.parents.end()), b.parents.end());
  }
  b.image_width = b.image_height = 0.0;
  if (j.contains("size")) {
    const Json& s = j["size"];
    if (!s.is_array() || s.size() != 2) throw FormatError(where + "'size' must be [width, height]");
    b.image_width = number(s[0], where + "size");
    b.image_height = number(s[1], where + "size");
    if (b.image_width <= 0 || b.image_height <= 0)
      throw FormatError(where + "image size must be positive");
  }
  if (j.contains("split")) {
    if (!j["split"].is_string()) throw FormatError(where + "'split' must be a string");
    b.split = j["split"].get<std::string>();
    if (b.split != "train" && b.split != "test" && !b.split.empty())
      throw FormatError(where + "'split' must be \"train\" or \"test\"");
  }
  return b;
}

}  // namespace

std::vector<std::string> PartOntology::parts_of(const std::string& whole) const {
  std::vector<std::string> out;
  for (const auto& [part, w] : pairs)
    if (w == whole) out.push_back(part);
  std::sort(out.begin(), out.end());
  return out;
}

void PartOntology::check() const {
  if (wholes.empty()) throw EmptyOntology("the ontology declares no whole classes");
  for (const auto& [part, whole] : pairs) {
    if (!parts.count(part)) throw InvalidSpec("pair uses undeclared part class '" + part + "'");
    if (!wholes.count(whole)) throw InvalidSpec("pair uses undeclared whole class '" + whole + "'");
  }
}

PartOntology PartOntology::from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("ontology must be a JSON object");
  PartOntology o;
  if (j.contains("wholes"))
    for (auto& w : string_list(j["wholes"], "'wholes'")) o.wholes.insert(w);
  if (j.contains("parts"))
    for (auto& p : string_list(j["parts"], "'parts'")) o.parts.insert(p);
  if (j.contains("pairs")) {
    if (!j["pairs"].is_array()) throw FormatError("'pairs' must be an array");
    for (const auto& p : j["pairs"]) {
      auto names = string_list(p, "ontology pair");
      if (names.size() != 2) throw FormatError("ontology pairs are [part, whole]");
      o.pairs.insert({names[0], names[1]});
    }
  }
  o.check();
  return o;
}

Json PartOntology::to_json() const {
  Json pj = Json::array();
  for (const auto& [p, w] : pairs) pj.push_back({p, w});
  return Json{{"wholes", wholes}, {"parts", parts}, {"pairs", pj}};
}

std::size_t Dataset::class_index(const std::string& name) const {
  auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end()) throw UnknownSymbol("class '" + name + "'");
  return static_cast<std::size_t>(it - classes.begin());
}

std::size_t Dataset::box_index(const std::string& id) const {
  for (std::size_t i = 0; i < boxes.size(); ++i)
    if (boxes[i].id == id) return i;
  throw UnknownSymbol("box '" + id + "'");
}

std::vector<std::size_t> Dataset::split_indices(bool test) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    if (boxes[i].is_test() == test) out.push_back(i);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Dataset::same_image_pairs(
    const std::vector<std::size_t>& indices) const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i : indices)
    for (std::size_t j : indices)
      if (i != j && boxes[i].image == boxes[j].image) out.emplace_back(i, j);
  return out;
}

bool Dataset::is_part(std::size_t part, std::size_t whole) const {
  const auto& ps = boxes[part].parents;
  return std::find(ps.begin(), ps.end(), boxes[whole].id) != ps.end();
}

Dataset parse_dataset(const std::string& text, std::vector<std::string> classes) {
  Dataset ds;
  bool header_seen = false;
  std::size_t line_no = 0, start = 0;
  std::vector<BoundingBox> boxes;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.is_object() && j.contains("classes") && !j.contains("id")) {
      if (header_seen || !boxes.empty())
        throw FormatError("line " + std::to_string(line_no) + ": misplaced class header");
      header_seen = true;
      auto declared = string_list(j["classes"], "'classes'");
      if (!classes.empty() && classes != declared)
        throw SignatureMismatch("dataset classes differ from the supplied class list");
      classes = declared;
      continue;
    }
    boxes.push_back(parse_box(j, line_no));
  }
  if (classes.empty()) throw FormatError("dataset has no class header and no class list was given");
  for (const auto& c : classes)
    if (!is_identifier(c) || c == kPartOf)
      throw FormatError("class name '" + c + "' is not a usable predicate symbol");
  ds.classes = classes;

  // Image extents default to the bounding hull of the image's boxes.
  std::map<std::string, std::pair<double, double>> hull;
  for (const auto& b : boxes) {
    auto& h = hull[b.image];
    h.first = std::max(h.first, b.x1);
    h.second = std::max(h.second, b.y1);
  }
  std::set<std::string> ids, dropped;
  for (auto& b : boxes) {
    if (!is_identifier(b.id)) throw FormatError("box id '" + b.id + "' is not an identifier");
    if (!ids.insert(b.id).second) throw FormatError("duplicate box id '" + b.id + "'");
    if (b.scores.size() != classes.size())
      throw FormatError("box '" + b.id + "' has " + std::to_string(b.scores.size()) +
                        " scores for " + std::to_string(classes.size()) + " classes");
    if (b.label) ds.class_index(*b.label);
    if (b.image_width == 0.0) {
      b.image_width = hull[b.image].first;
      b.image_height = hull[b.image].second;
    }
    if (b.x1 - b.x0 < kMinSidePixels || b.y1 - b.y0 < kMinSidePixels) {
      dropped.insert(b.id);
      continue;
    }
    ds.boxes.push_back(b);
  }
  for (auto& b : ds.boxes) {
    std::vector<std::string> kept;
    for (const auto& p : b.parents) {
      if (dropped.count(p)) continue;
      if (!ids.count(p)) throw FormatError("box '" + b.id + "' names unknown parent '" + p + "'");
      if (p == b.id) throw FormatError("box '" + b.id + "' is its own parent");
      kept.push_back(p);
    }
    b.parents = std::move(kept);
  }
  return ds;
}

Dataset load_dataset(const std::string& path, std::vector<std::string> classes) {
  return parse_dataset(read_file(path), std::move(classes));
}

std::string serialize_dataset(const Dataset& ds) {
  std::string out = canonical_json(Json{{"classes", ds.classes}}) + "\n";
  for (const auto& b : ds.boxes) {
    Json j{{"id", b.id},
           {"image", b.image},
           {"box", {b.x0, b.y0, b.x1, b.y1}},
           {"scores", b.scores},
           {"size", {b.image_width, b.image_height}}};
    if (b.label) j["label"] = *b.label;
    if (b.parents.size() == 1) j["parent"] = b.parents.front();
    if (b.parents.size() > 1) j["parent"] = b.parents;
    if (!b.split.empty()) j["split"] = b.split;
    out += canonical_json(j) + "\n";
  }
  return out;
}

std::vector<double> feature_vector(const BoundingBox& b) {
  std::vector<double> v = b.scores;
  v.push_back(b.x0 / b.image_width);
  v.push_back(b.y0 / b.image_height);
  v.push_back(b.x1 / b.image_width);
  v.push_back(b.y1 / b.image_height);
  return v;
}

double inclusion_ratio(const BoundingBox& b, const BoundingBox& other) {
  double w = std::min(b.x1, other.x1) - std::max(b.x0, other.x0);
  double h = std::min(b.y1, other.y1) - std::max(b.y0, other.y0);
  double area = b.area();
  if (w <= 0 || h <= 0 || area <= 0) return 0.0;
  return std::clamp(w * h / area, 0.0, 1.0);
}

std::size_t baseline_type(const std::vector<double>& scores) {
  if (scores.empty()) throw InvalidSpec("empty score block");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

double baseline_partof_score(const BoundingBox& part, const BoundingBox& whole,
                             const PartOntology& onto, const std::vector<std::string>& classes) {
  double best = 0.0;
  for (std::size_t i = 0; i < classes.size(); ++i)
    for (std::size_t j = 0; j < classes.size(); ++j)
      if (onto.is_part_of(classes[i], classes[j]))
        best = std::max(best, part.scores.at(i) * whole.scores.at(j));
  return inclusion_ratio(part, whole) * best;
}

bool baseline_partof(const BoundingBox& part, const BoundingBox& whole, const PartOntology& onto,
                     const std::vector<std::string>& classes, double th_ir) {
  if (!(th_ir > 0.5 && th_ir <= 1.0)) throw InvalidSpec("th_ir must lie in (0.5, 1]");
  return baseline_partof_score(part, whole, onto, classes) >= th_ir;
}

}  // namespace ltn::sii
