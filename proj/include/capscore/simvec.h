#pragma once

#include "capscore/embedding_io.h"
#include "capscore/tensor.h"

#include <cstddef>
#include <string>
#include <vector>

namespace capscore {

enum class FeatureMode {
  full,          // similarity vectors (Hadamard products and absolute differences)
  raw_features,  // ablation: raw embeddings tokenized directly
  single_ref,    // full layout restricted to exactly one reference
};

const char* to_string(FeatureMode mode);
FeatureMode feature_mode_from_string(const std::string& s);

struct SimVecConfig {
  std::size_t d_clip = 512;
  std::size_t d_rb = 768;
  std::size_t d_model = 64;
  std::size_t max_refs = 16;
  FeatureMode mode = FeatureMode::full;

  void validate() const;

  bool operator==(const SimVecConfig&) const = default;
};

// Which encoder width a row of features came from; selects the projection.
enum class Width { clip, rb };

enum class TokenGroup {
  cls,
  h_clip,
  dd_clip,
  h_rb,
  dd_rb,
  raw_c_clip,
  raw_r_clip,
  raw_c_rb,
  raw_r_rb,
  raw_v,
};

const char* to_string(TokenGroup g);

// Similarity-vector groups, one row per vector.
//   h_clip  : (N+1) x d_clip, row 0 = c_clip*v, row i = c_clip*r_clip[i-1]
//   dd_clip : (N+1) x d_clip, row 0 = |c_clip-v|, row i = |c_clip-r_clip[i-1]|
//   h_rb    : N x d_rb,       row i = c_rb*r_rb[i]
//   dd_rb   : N x d_rb,       row i = |c_rb-r_rb[i]|
template <typename T>
struct SimVecFeatures {
  Mat<T> h_clip;
  Mat<T> dd_clip;
  Mat<T> h_rb;
  Mat<T> dd_rb;
};

template <typename T>
std::vector<T> hadamard(std::span<const T> a, std::span<const T> b);
template <typename T>
std::vector<T> abs_diff(std::span<const T> a, std::span<const T> b);

template <typename T>
SimVecFeatures<T> extract_sim_vec(const EmbeddingSet& e);

// Pre-projection token source: contiguous blocks of rows, each tagged with the
// encoder width it projects from. Block order is the token order after CLS.
template <typename T>
struct FeatureBlock {
  TokenGroup group;
  Width width;
  Mat<T> rows;
};

template <typename T>
struct TokenSource {
  std::vector<FeatureBlock<T>> blocks;
  std::size_t num_refs = 0;

  std::size_t num_rows() const;
};

// Builds the blocks for the configured mode. Throws if N exceeds max_refs or
// widths disagree with the config.
template <typename T>
TokenSource<T> build_token_source(const EmbeddingSet& e, const SimVecConfig& config);

template <typename T>
struct Projection {
  Mat<T> weight;  // in_width x d_model
  Mat<T> bias;    // 1 x d_model
};

template <typename T>
struct SimVecTokens {
  Mat<T> tokens;  // rows = tokens, CLS first when present
  std::vector<TokenGroup> source_tags;
};

// Maps each block through its width's projection and prepends cls (if non-empty).
template <typename T>
SimVecTokens<T> tokenize(const TokenSource<T>& source, const Projection<T>& clip,
                         const Projection<T>& rb, const Mat<T>& cls);

// 4N+3 (full, single_ref) or 2N+4 (raw_features), CLS included.
std::size_t expected_token_count(FeatureMode mode, std::size_t num_refs);

}  // namespace capscore
