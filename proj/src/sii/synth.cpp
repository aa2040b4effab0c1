#include <algorithm>
#include <cmath>
#include <map>

#include "ltn/error.hpp"
#include "ltn/sii.hpp"

namespace ltn::sii {

void SynthSpec::check() const {
  if (wholes == 0) throw InvalidSpec("synth needs at least one whole class");
  if (images == 0) throw InvalidSpec("synth needs at least one image");
  if (wholes_per_image == 0) throw InvalidSpec("synth needs at least one whole per image");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidSpec("sigma must be finite and >= 0");
  if (!(contradiction_rate >= 0.0 && contradiction_rate <= 1.0))
    throw InvalidSpec("contradiction rate must lie in [0, 1]");
  // The smallest part is about 0.17 of a strip wide and must keep 6 pixels.
  if (!(image_size / static_cast<double>(wholes_per_image) >= 40.0))
    throw InvalidSpec("image too small for " + std::to_string(wholes_per_image) +
                      " wholes per image");
}

namespace {

struct Generator {
  const SynthSpec& spec;
  Rng rng;
  Dataset ds;
  std::size_t next_id = 0;

  std::size_t n_classes() const { return ds.classes.size(); }

  BoundingBox& add(const std::string& image, std::size_t label, double x0, double y0, double x1,
                   double y1) {
    BoundingBox b;
    b.id = "b" + std::to_string(next_id++);
    b.image = image;
    b.x0 = x0, b.y0 = y0, b.x1 = x1, b.y1 = y1;
    b.image_width = b.image_height = spec.image_size;
    b.label = ds.classes[label];
    b.scores.assign(n_classes(), 0.0);
    b.scores[label] = 1.0;
    if (spec.sigma > 0)
      for (auto& s : b.scores) s = std::clamp(s + spec.sigma * rng.gaussian(), 0.0, 1.0);
    ds.boxes.push_back(std::move(b));
    return ds.boxes.back();
  }

  void image(std::size_t index) {
    const double S = spec.image_size;
    const double strip = S / static_cast<double>(spec.wholes_per_image);
    const std::size_t N = spec.wholes;
    std::string name = "img" + std::to_string(index);
    for (std::size_t s = 0; s < spec.wholes_per_image; ++s) {
      std::size_t w = rng.index(N);
      double x0 = static_cast<double>(s) * strip + rng.uniform(0.05, 0.15) * strip;
      double x1 = static_cast<double>(s + 1) * strip - rng.uniform(0.05, 0.15) * strip;
      double y0 = rng.uniform(0.30, 0.40) * S;
      double y1 = rng.uniform(0.85, 0.95) * S;
      std::string whole_id = add(name, w, x0, y0, x1, y1).id;
      const double W = x1 - x0, H = y1 - y0;

      std::vector<std::size_t> parts{w, (w + 1) % N};
      if (parts[0] == parts[1]) parts.pop_back();
      for (std::size_t slot = 0; slot < parts.size(); ++slot) {
        double pw = rng.uniform(0.25, 0.40) * W;
        double ph = rng.uniform(0.20, 0.30) * H;
        double left = x0 + (0.05 + 0.45 * static_cast<double>(slot)) * W;
        double px0 = left + rng.uniform(0.0, 1.0) * (0.45 * W - pw);
        bool detached = rng.uniform(0.0, 1.0) < spec.contradiction_rate;
        double py0 = detached ? y0 + 0.65 * H + rng.uniform(0.0, 1.0) * (0.32 * H - ph)
                              : y0 - rng.uniform(0.05, 0.20) * ph;
        auto& p = add(name, N + parts[slot], px0, py0, px0 + pw, py0 + ph);
        if (!detached) p.parents.push_back(whole_id);
      }
    }
  }
};

}  // namespace

SynthResult synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  spec.check();
  Generator gen{spec, Rng(seed), {}};
  SynthResult out;
  for (std::size_t i = 0; i < spec.wholes; ++i) gen.ds.classes.push_back("whole_" + std::to_string(i));
  for (std::size_t i = 0; i < spec.wholes; ++i) gen.ds.classes.push_back("part_" + std::to_string(i));
  for (std::size_t i = 0; i < spec.wholes; ++i) {
    std::string w = "whole_" + std::to_string(i);
    out.ontology.wholes.insert(w);
    for (std::size_t p : {i, (i + 1) % spec.wholes}) {
      out.ontology.parts.insert("part_" + std::to_string(p));
      out.ontology.pairs.insert({"part_" + std::to_string(p), w});
    }
  }
  for (std::size_t i = 0; i < spec.images; ++i) gen.image(i);
  out.dataset = split_by_image(gen.ds, 0.2, seed);
  return out;
}

Dataset split_by_image(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
    throw InvalidSpec("test fraction must lie in [0, 1]");
  std::vector<std::string> images;
  std::map<std::string, std::size_t> sizes;
  for (const auto& b : ds.boxes)
    if (sizes[b.image]++ == 0) images.push_back(b.image);
  Rng rng(seed);
  for (std::size_t i = images.size(); i > 1; --i) std::swap(images[i - 1], images[rng.index(i)]);

  const double target = test_fraction * static_cast<double>(ds.boxes.size());
  std::set<std::string> test;
  double taken = 0.0;
  for (const auto& im : images) {
    double n = static_cast<double>(sizes[im]);
    if (taken + n / 2.0 > target) continue;
    test.insert(im);
    taken += n;
  }
  Dataset out = ds;
  for (auto& b : out.boxes) b.split = test.count(b.image) ? "test" : "train";
  return out;
}

}  // namespace ltn::sii
