#pragma once

#include "capscore/embedding_io.h"
#include "capscore/eval_stats.h"
#include "capscore/protocol_files.h"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace capscore {

// Synthetic corpus with a known latent rule.
//
// Each image owns a clip-space anchor v and a text-space anchor u. A candidate
// of quality q is q*anchor + sqrt(1-q^2)*noise with noise orthogonal to the
// anchor, so cosine(c_clip, v) = q up to f32 rounding. References sit at a fixed
// alignment to the anchors. Human scores follow
//   y = sigmoid(sharpness * (cosine(c_clip, v) - midpoint)).
// FOIL pairs reuse the correct caption's noise direction at a lower quality;
// PASCAL pairs draw two qualities separated by a category-dependent gap.
struct SynthConfig {
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::size_t d_clip = 512;
  std::size_t d_rb = 768;
  std::size_t min_refs = 1;
  std::size_t max_refs = 5;
  std::size_t foil_pairs = 0;    // 0: count / 4, at least 1
  std::size_t foil_refs = 4;
  std::size_t pascal_items = 0;  // 0: count / 10, at least 8
  std::size_t pascal_refs = 8;
  double sharpness = 8.0;
  double midpoint = 0.5;
  double ref_alignment = 0.7;
};

struct SynthCorpus {
  std::vector<CaptionSample> dataset;
  std::vector<FoilRecord> foil;
  std::vector<Pascal50sItem> pascal;
  EmbeddingCache cache;
};

double latent_score(const EmbeddingSet& e, double sharpness = 8.0, double midpoint = 0.5);
double cosine(const Embedding& a, const Embedding& b);

// Throws if the latent rule fails to rank any FOIL correct caption above its foil.
SynthCorpus generate_synthetic(const SynthConfig& config);

}  // namespace capscore
