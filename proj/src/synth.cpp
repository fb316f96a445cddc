#include "capscore/synth.h"

#include "capscore/error.h"
#include "capscore/rng.h"

#include <cmath>
#include <cstdio>

namespace capscore {

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::shape, "cosine: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

double latent_score(const EmbeddingSet& e, double sharpness, double midpoint) {
  return 1.0 / (1.0 + std::exp(-sharpness * (cosine(e.c_clip, e.v) - midpoint)));
}

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

class Generator {
 public:
  explicit Generator(const SynthConfig& c) : c_(c) {}

  // q*anchor + sqrt(1-q^2)*n, n a unit vector orthogonal to anchor.
  Embedding blend(const Embedding& anchor, double q, const std::string& noise_key) const {
    const Embedding noise = stub_embed(noise_key, anchor.size(), c_.seed);
    double along = 0;
    for (std::size_t i = 0; i < anchor.size(); ++i) along += static_cast<double>(noise[i]) * anchor[i];
    std::vector<double> ortho(anchor.size());
    double ss = 0;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
      ortho[i] = noise[i] - along * anchor[i];
      ss += ortho[i] * ortho[i];
    }
    const double inv = 1.0 / std::sqrt(ss);
    const double w = std::sqrt(std::max(0.0, 1.0 - q * q));
    Embedding out(anchor.size());
    for (std::size_t i = 0; i < anchor.size(); ++i) {
      out[i] = static_cast<float>(q * anchor[i] + w * ortho[i] * inv);
    }
    return out;
  }

  double uniform(const std::string& key, double lo, double hi) const {
    CounterStream s(hash_key(key, c_.seed));
    return lo + (hi - lo) * (s.next_unit());
  }

  struct Image {
    std::string ref;
    Embedding v, u;
    std::vector<Embedding> r_clip, r_rb;
    std::vector<std::string> texts;
  };

  Image image(const std::string& ref, std::size_t n_refs) const {
    Image img;
    img.ref = ref;
    img.v = stub_embed(ref + "/clip", c_.d_clip, c_.seed);
    img.u = stub_embed(ref + "/text", c_.d_rb, c_.seed);
    for (std::size_t j = 0; j < n_refs; ++j) {
      const std::string key = ref + "/ref" + std::to_string(j);
      img.r_clip.push_back(blend(img.v, c_.ref_alignment, key + "/clip"));
      img.r_rb.push_back(blend(img.u, c_.ref_alignment, key + "/text"));
      img.texts.push_back("reference " + std::to_string(j) + " of " + ref);
    }
    return img;
  }

  EmbeddingSet candidate(const Image& img, double q, const std::string& noise_key) const {
    EmbeddingSet e;
    e.v = img.v;
    e.c_clip = blend(img.v, q, noise_key + "/clip");
    e.r_clip = img.r_clip;
    e.c_rb = blend(img.u, q, noise_key + "/text");
    e.r_rb = img.r_rb;
    return e;
  }

 private:
  const SynthConfig& c_;
};

}  // namespace

SynthCorpus generate_synthetic(const SynthConfig& c) {
  if (c.count == 0) throw Error(ErrorKind::domain, "gen-synth: count must be >= 1");
  if (c.min_refs == 0 || c.min_refs > c.max_refs) {
    throw Error(ErrorKind::domain, "gen-synth: need 1 <= min_refs <= max_refs");
  }
  Generator gen(c);
  SynthCorpus out;
  out.cache.d_clip = static_cast<std::uint32_t>(c.d_clip);
  out.cache.d_rb = static_cast<std::uint32_t>(c.d_rb);

  // Several candidates per image, as in crowd-judged caption corpora.
  const std::size_t n_images = std::max<std::size_t>(1, c.count / 4);
  std::vector<Generator::Image> images;
  for (std::size_t k = 0; k < n_images; ++k) {
    const std::string ref = numbered("img", k);
    const auto span = c.max_refs - c.min_refs + 1;
    const std::size_t n_refs =
        c.min_refs + static_cast<std::size_t>(gen.uniform(ref + "/nrefs", 0.0, 1.0) * span) % span;
    images.push_back(gen.image(ref, n_refs));
  }
  for (std::size_t i = 0; i < c.count; ++i) {
    const std::string id = numbered("s", i);
    const auto& img = images[i % n_images];
    const double q = gen.uniform(id + "/quality", 0.05, 0.95);
    EmbeddingSet e = gen.candidate(img, q, id + "/cand");
    CaptionSample s;
    s.id = id;
    s.image_ref = img.ref;
    s.candidate = "candidate " + id + " for " + img.ref;
    s.references = img.texts;
    s.human_score = latent_score(e, c.sharpness, c.midpoint);
    out.cache.records.emplace(id, std::move(e));
    out.dataset.push_back(std::move(s));
  }

  const std::size_t n_foil = c.foil_pairs ? c.foil_pairs : std::max<std::size_t>(1, c.count / 4);
  for (std::size_t i = 0; i < n_foil; ++i) {
    const std::string id = numbered("f", i);
    const auto img = gen.image(numbered("foil-img", i), c.foil_refs);
    const double q_correct = gen.uniform(id + "/quality", 0.55, 0.95);
    const double q_foil = std::max(0.02, q_correct - gen.uniform(id + "/gap", 0.25, 0.45));
    EmbeddingSet good = gen.candidate(img, q_correct, id + "/cand");
    EmbeddingSet bad = gen.candidate(img, q_foil, id + "/cand");
    if (!(latent_score(good, c.sharpness, c.midpoint) > latent_score(bad, c.sharpness, c.midpoint))) {
      throw Error(ErrorKind::numeric, "latent rule does not rank FOIL pair '" + id + "' correctly");
    }
    out.foil.push_back({id, img.ref, "correct caption " + id, "foiled caption " + id, img.texts});
    out.cache.records.emplace(foil_key(id, true), std::move(good));
    out.cache.records.emplace(foil_key(id, false), std::move(bad));
  }

  const std::size_t n_pascal = c.pascal_items ? c.pascal_items : std::max<std::size_t>(8, c.count / 10);
  constexpr PascalCategory kCats[] = {PascalCategory::HC, PascalCategory::HI, PascalCategory::HM,
                                      PascalCategory::MM};
  constexpr double kGap[] = {0.15, 0.45, 0.30, 0.20};
  for (std::size_t i = 0; i < n_pascal; ++i) {
    const std::string id = numbered("p", i);
    const auto img = gen.image(numbered("pascal-img", i), c.pascal_refs);
    const double q_hi = gen.uniform(id + "/quality", 0.5, 0.95);
    const double q_lo = q_hi - kGap[i % 4];
    const bool better_is_a = gen.uniform(id + "/side", 0.0, 1.0) < 0.5;
    EmbeddingSet hi = gen.candidate(img, q_hi, id + "/hi");
    EmbeddingSet lo = gen.candidate(img, q_lo, id + "/lo");
    Pascal50sItem item;
    item.id = id;
    item.image_ref = img.ref;
    item.caption_a = "caption a " + id;
    item.caption_b = "caption b " + id;
    item.references = img.texts;
    item.category = kCats[i % 4];
    item.majority_label = better_is_a ? 'A' : 'B';
    out.cache.records.emplace(pascal_key(id, 'A'), better_is_a ? hi : lo);
    out.cache.records.emplace(pascal_key(id, 'B'), better_is_a ? lo : hi);
    out.pascal.push_back(std::move(item));
  }
  return out;
}

}  // namespace capscore
