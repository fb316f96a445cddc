#pragma once

#include "capscore/embedding_io.h"
#include "capscore/simvec.h"
#include "capscore/tensor.h"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace capscore {

enum class Arch { transformer, mlp_ablation };
enum class Aggregate { none, max, mean };

const char* to_string(Arch a);
const char* to_string(Aggregate a);
Arch arch_from_string(const std::string& s);
Aggregate aggregate_from_string(const std::string& s);

struct ModelConfig {
  SimVecConfig features;
  std::size_t n_layers = 3;
  std::size_t n_heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t head_hidden = 64;
  Arch arch = Arch::transformer;
  Aggregate aggregate = Aggregate::none;

  std::size_t d_model() const { return features.d_model; }
  // Hidden layers in the scalar head: one for the transformer, two for mlp_ablation.
  std::size_t head_depth() const { return arch == Arch::transformer ? 1 : 2; }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// d_model=64, 3 layers, 4 heads.
ModelConfig desk_profile(std::size_t d_clip = 512, std::size_t d_rb = 768);
// d_model=512, 3 layers, 8 heads.
ModelConfig full_profile(std::size_t d_clip = 512, std::size_t d_rb = 768);

template <typename T>
struct Dense {
  Mat<T> weight;  // in x out
  Mat<T> bias;    // 1 x out
};

template <typename T>
struct LayerNormParams {
  Mat<T> gain;   // 1 x d
  Mat<T> shift;  // 1 x d
};

template <typename T>
struct EncoderLayer {
  LayerNormParams<T> norm_attn;
  Dense<T> query, key, value, attn_out;
  LayerNormParams<T> norm_ffn;
  Dense<T> ffn_in, ffn_out;
};

// All trainable tensors. The same struct carries gradients.
template <typename T>
struct ModelParams {
  Projection<T> proj_clip;
  Projection<T> proj_rb;
  Mat<T> cls;  // 1 x d_model; empty for mlp_ablation
  std::vector<EncoderLayer<T>> layers;
  LayerNormParams<T> final_norm;  // empty for mlp_ablation
  std::vector<Dense<T>> head;     // hidden layers then the 1-wide output layer

  // Fixed traversal order; checkpoints, optimizers and gradient checks rely on it.
  std::vector<Mat<T>*> tensors();
  std::vector<const Mat<T>*> tensors() const;
  std::vector<std::string> tensor_names() const;
  std::size_t parameter_count() const;

  template <typename U>
  ModelParams<U> cast() const;

  bool operator==(const ModelParams& other) const;
};

// Zero-filled params with the shapes implied by config.
template <typename T>
ModelParams<T> zero_params(const ModelConfig& config);

// Closed-form parameter count from config alone.
std::size_t parameter_count(const ModelConfig& config);

// Normal weights with variance 1/fan_in, zero biases, unit norm gains,
// CLS ~ N(0, 0.02^2).
ModelParams<double> init_params(const ModelConfig& config, std::uint64_t seed);

template <typename T>
struct LayerNormCache {
  Mat<T> normalized;     // x_hat
  Mat<T> inv_std;        // rows x 1
};

template <typename T>
struct LayerTrace {
  Mat<T> input;
  LayerNormCache<T> norm_attn;
  Mat<T> attn_in;  // normalized input
  Mat<T> q, k, v;
  std::vector<Mat<T>> probs;  // per head, L x L
  Mat<T> context;             // concatenated head outputs
  Mat<T> after_attn;          // residual stream after attention
  LayerNormCache<T> norm_ffn;
  Mat<T> ffn_in;     // normalized
  Mat<T> pre_gelu;
  Mat<T> hidden;
};

template <typename T>
struct ForwardTrace {
  // Shape fingerprint for consistency checks in backward.
  std::size_t d_model = 0;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  Arch arch = Arch::transformer;

  TokenSource<T> source;
  Mat<T> tokens;  // after projection, CLS at row 0 for the transformer
  std::vector<LayerTrace<T>> layers;
  Mat<T> encoded;  // final residual stream
  LayerNormCache<T> final_norm;
  Mat<T> pooled;  // head input (normalized CLS, or mean token for mlp_ablation)
  std::vector<Mat<T>> head_pre;  // pre-activation of each hidden layer
  std::vector<Mat<T>> head_act;  // activations feeding each head layer (head_act[0] = pooled)
  T logit = 0;
  T score = 0;
};

template <typename T>
struct Gradients {
  ModelParams<T> params;
  Mat<T> tokens;  // d score / d token rows
};

template <typename T>
struct ForwardResult {
  T score;
  ForwardTrace<T> trace;
};

// Runs the model on one tokenized sample. Throws shape error on width mismatch
// and numeric error (naming the layer) on non-finite activations.
template <typename T>
ForwardResult<T> forward(const TokenSource<T>& source, const ModelParams<T>& params,
                         const ModelConfig& config);

template <typename T>
Gradients<T> backward(const ForwardTrace<T>& trace, T dscore, const ModelParams<T>& params);

// Score plus whatever is needed to backpropagate through the aggregate fold.
template <typename T>
struct SampleTrace {
  std::vector<ForwardTrace<T>> parts;
  std::vector<T> part_scores;
  Aggregate aggregate = Aggregate::none;
  T score = 0;
};

template <typename T>
SampleTrace<T> score_sample_traced(const EmbeddingSet& e, const ModelParams<T>& params,
                                   const ModelConfig& config);

// Accumulates param gradients of dscore * score into grads.
template <typename T>
void backward_sample(const SampleTrace<T>& trace, T dscore, const ModelParams<T>& params,
                     ModelParams<T>& grads);

template <typename T>
T score_sample(const EmbeddingSet& e, const ModelParams<T>& params, const ModelConfig& config);

template <typename T>
T fold_scores(Aggregate aggregate, const std::vector<T>& scores);

// Checkpoint: "SVTM", u32 version, u32 config length, JSON config, then every
// tensor from ModelParams::tensors() as little-endian f32, row-major.
struct Checkpoint {
  ModelConfig config;
  ModelParams<double> params;
};

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

std::string serialize_checkpoint(const ModelParams<double>& params, const ModelConfig& config);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const ModelParams<double>& params, const ModelConfig& config,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Params rounded through f32, as a checkpoint would store them.
ModelParams<double> round_to_f32(const ModelParams<double>& params);

}  // namespace capscore
