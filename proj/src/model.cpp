#include "capscore/model.h"

#include "capscore/error.h"
#include "capscore/rng.h"

#include <cmath>
#include <limits>
#include <numbers>

namespace capscore {

const char* to_string(Arch a) { return a == Arch::transformer ? "transformer" : "mlp_ablation"; }

const char* to_string(Aggregate a) {
  switch (a) {
    case Aggregate::none: return "none";
    case Aggregate::max: return "max";
    case Aggregate::mean: return "mean";
  }
  return "?";
}

Arch arch_from_string(const std::string& s) {
  if (s == "transformer") return Arch::transformer;
  if (s == "mlp_ablation") return Arch::mlp_ablation;
  throw Error(ErrorKind::configuration, "unknown arch '" + s + "'");
}

Aggregate aggregate_from_string(const std::string& s) {
  if (s == "none") return Aggregate::none;
  if (s == "max") return Aggregate::max;
  if (s == "mean") return Aggregate::mean;
  throw Error(ErrorKind::configuration, "unknown aggregate '" + s + "'");
}

void ModelConfig::validate() const {
  features.validate();
  if (features.mode == FeatureMode::single_ref) {
    throw Error(ErrorKind::configuration, "single_ref is a per-reference layout, not a model mode");
  }
  if (n_heads == 0 || features.d_model % n_heads != 0) {
    throw Error(ErrorKind::configuration, "n_heads must divide d_model");
  }
  if (arch == Arch::transformer && n_layers == 0) {
    throw Error(ErrorKind::configuration, "n_layers must be positive");
  }
  if (ffn_mult == 0 || head_hidden == 0) {
    throw Error(ErrorKind::configuration, "ffn_mult and head_hidden must be positive");
  }
}

ModelConfig desk_profile(std::size_t d_clip, std::size_t d_rb) {
  ModelConfig c;
  c.features.d_clip = d_clip;
  c.features.d_rb = d_rb;
  c.features.d_model = 64;
  c.n_layers = 3;
  c.n_heads = 4;
  c.ffn_mult = 4;
  c.head_hidden = 64;
  return c;
}

ModelConfig full_profile(std::size_t d_clip, std::size_t d_rb) {
  ModelConfig c = desk_profile(d_clip, d_rb);
  c.features.d_model = 512;
  c.n_heads = 8;
  c.head_hidden = 512;
  return c;
}

// ---------------------------------------------------------------------------
// Parameter containers

template <typename T>
std::vector<Mat<T>*> ModelParams<T>::tensors() {
  std::vector<Mat<T>*> out{&proj_clip.weight, &proj_clip.bias, &proj_rb.weight, &proj_rb.bias, &cls};
  for (auto& l : layers) {
    for (Mat<T>* m : {&l.norm_attn.gain, &l.norm_attn.shift, &l.query.weight, &l.query.bias,
                      &l.key.weight, &l.key.bias, &l.value.weight, &l.value.bias,
                      &l.attn_out.weight, &l.attn_out.bias, &l.norm_ffn.gain, &l.norm_ffn.shift,
                      &l.ffn_in.weight, &l.ffn_in.bias, &l.ffn_out.weight, &l.ffn_out.bias}) {
      out.push_back(m);
    }
  }
  out.push_back(&final_norm.gain);
  out.push_back(&final_norm.shift);
  for (auto& h : head) {
    out.push_back(&h.weight);
    out.push_back(&h.bias);
  }
  return out;
}

template <typename T>
std::vector<const Mat<T>*> ModelParams<T>::tensors() const {
  auto mut = const_cast<ModelParams<T>*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

template <typename T>
std::vector<std::string> ModelParams<T>::tensor_names() const {
  std::vector<std::string> out{"proj_clip.weight", "proj_clip.bias", "proj_rb.weight", "proj_rb.bias",
                               "cls"};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    for (const char* n : {"norm_attn.gain", "norm_attn.shift", "query.weight", "query.bias",
                          "key.weight", "key.bias", "value.weight", "value.bias",
                          "attn_out.weight", "attn_out.bias", "norm_ffn.gain", "norm_ffn.shift",
                          "ffn_in.weight", "ffn_in.bias", "ffn_out.weight", "ffn_out.bias"}) {
      out.push_back(p + n);
    }
  }
  out.push_back("final_norm.gain");
  out.push_back("final_norm.shift");
  for (std::size_t i = 0; i < head.size(); ++i) {
    out.push_back("head" + std::to_string(i) + ".weight");
    out.push_back("head" + std::to_string(i) + ".bias");
  }
  return out;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* m : tensors()) n += static_cast<std::size_t>(m->size());
  return n;
}

template <typename T>
bool ModelParams<T>::operator==(const ModelParams& other) const {
  auto a = tensors();
  auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols()) return false;
    if (*a[i] != *b[i]) return false;
  }
  return true;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.layers.resize(layers.size());
  out.head.resize(head.size());
  auto src = tensors();
  auto dst = out.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
  return out;
}

template <typename T>
ModelParams<T> zero_params(const ModelConfig& config) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.d_model());
  const auto d_clip = static_cast<Eigen::Index>(config.features.d_clip);
  const auto d_rb = static_cast<Eigen::Index>(config.features.d_rb);
  const auto ffn = static_cast<Eigen::Index>(config.ffn_mult * config.d_model());
  const auto hh = static_cast<Eigen::Index>(config.head_hidden);

  auto dense = [](Eigen::Index in, Eigen::Index out) {
    return Dense<T>{Mat<T>::Zero(in, out), Mat<T>::Zero(1, out)};
  };
  auto norm = [](Eigen::Index width) {
    return LayerNormParams<T>{Mat<T>::Zero(1, width), Mat<T>::Zero(1, width)};
  };

  ModelParams<T> p;
  p.proj_clip = {Mat<T>::Zero(d_clip, d), Mat<T>::Zero(1, d)};
  p.proj_rb = {Mat<T>::Zero(d_rb, d), Mat<T>::Zero(1, d)};
  if (config.arch == Arch::transformer) {
    p.cls = Mat<T>::Zero(1, d);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
      p.layers.push_back({norm(d), dense(d, d), dense(d, d), dense(d, d), dense(d, d), norm(d),
                          dense(d, ffn), dense(ffn, d)});
    }
    p.final_norm = norm(d);
  } else {
    p.cls = Mat<T>(0, 0);
    p.final_norm = {Mat<T>(0, 0), Mat<T>(0, 0)};
  }
  Eigen::Index in = d;
  for (std::size_t k = 0; k < config.head_depth(); ++k) {
    p.head.push_back(dense(in, hh));
    in = hh;
  }
  p.head.push_back(dense(in, 1));
  return p;
}

std::size_t parameter_count(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.d_model();
  const std::size_t ffn = config.ffn_mult * d;
  const std::size_t hh = config.head_hidden;
  std::size_t n = (config.features.d_clip + 1) * d + (config.features.d_rb + 1) * d;
  if (config.arch == Arch::transformer) {
    const std::size_t per_layer = 2 * d            // attention norm
                                  + 4 * (d * d + d)  // q, k, v, out
                                  + 2 * d            // ffn norm
                                  + (d * ffn + ffn) + (ffn * d + d);
    n += d + config.n_layers * per_layer + 2 * d;
  }
  std::size_t in = d;
  for (std::size_t k = 0; k < config.head_depth(); ++k) {
    n += in * hh + hh;
    in = hh;
  }
  return n + in + 1;
}

ModelParams<double> init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams<double> p = zero_params<double>(config);
  Rng rng(seed);
  auto fill_weight = [&](Mat<double>& w) {
    const double scale = std::sqrt(1.0 / static_cast<double>(w.rows()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal() * scale;
  };
  auto fill_norm = [](LayerNormParams<double>& n) { n.gain.setOnes(); };

  fill_weight(p.proj_clip.weight);
  fill_weight(p.proj_rb.weight);
  for (Eigen::Index i = 0; i < p.cls.size(); ++i) p.cls.data()[i] = 0.02 * rng.normal();
  for (auto& l : p.layers) {
    fill_norm(l.norm_attn);
    for (Dense<double>* dn : {&l.query, &l.key, &l.value, &l.attn_out}) fill_weight(dn->weight);
    fill_norm(l.norm_ffn);
    fill_weight(l.ffn_in.weight);
    fill_weight(l.ffn_out.weight);
  }
  if (p.final_norm.gain.size() != 0) fill_norm(p.final_norm);
  for (auto& h : p.head) fill_weight(h.weight);
  return p;
}

ModelParams<double> round_to_f32(const ModelParams<double>& params) {
  return params.cast<float>().cast<double>();
}

// ---------------------------------------------------------------------------
// Forward / backward kernels

namespace {

constexpr double kNormEps = 1e-5;

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const LayerNormParams<T>& p, LayerNormCache<T>& cache) {
  const T width = static_cast<T>(x.cols());
  Mat<T> centered = x.colwise() - (x.rowwise().sum() / width);
  cache.inv_std = ((centered.array().square().rowwise().sum() / width) + T(kNormEps)).rsqrt().matrix();
  cache.normalized = centered.array().colwise() * cache.inv_std.col(0).array();
  Mat<T> y = cache.normalized.array().rowwise() * p.gain.row(0).array();
  y.rowwise() += p.shift.row(0);
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const LayerNormCache<T>& cache,
                           const LayerNormParams<T>& p, LayerNormParams<T>& grad) {
  const T width = static_cast<T>(dy.cols());
  grad.gain += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  grad.shift += dy.colwise().sum();
  Mat<T> dxhat = dy.array().rowwise() * p.gain.row(0).array();
  auto mean_dxhat = (dxhat.rowwise().sum() / width).eval();
  auto mean_dxhat_xhat = ((dxhat.array() * cache.normalized.array()).rowwise().sum() / width).eval();
  Mat<T> dx = dxhat.colwise() - mean_dxhat.col(0);
  dx -= (cache.normalized.array().colwise() * mean_dxhat_xhat.col(0).array()).matrix();
  return dx.array().colwise() * cache.inv_std.col(0).array();
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2)));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2)));
  const T pdf = std::exp(T(-0.5) * x * x) * T(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + x * pdf;
}

template <typename T>
Mat<T> affine(const Mat<T>& x, const Dense<T>& d) {
  Mat<T> y = x * d.weight;
  y.rowwise() += d.bias.row(0);
  return y;
}

template <typename T>
Mat<T> affine_backward(const Mat<T>& dy, const Mat<T>& x, const Dense<T>& d, Dense<T>& grad) {
  grad.weight.noalias() += x.transpose() * dy;
  grad.bias += dy.colwise().sum();
  return dy * d.weight.transpose();
}

template <typename T>
void softmax_rows(Mat<T>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

template <typename T>
T sigmoid(T z) {
  T s = z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
  // Keep the score strictly inside (0, 1).
  s = std::max(s, std::numeric_limits<T>::min());
  s = std::min(s, std::nextafter(T(1), T(0)));
  return s;
}

template <typename T>
void require_finite(const Mat<T>& m, const std::string& where) {
  if (!m.allFinite()) throw Error(ErrorKind::numeric, "non-finite activation in " + where);
}

template <typename T>
void add_into(ModelParams<T>& acc, const ModelParams<T>& g, T scale) {
  auto a = acc.tensors();
  auto b = g.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) *a[i] += scale * *b[i];
}

}  // namespace

template <typename T>
ForwardResult<T> forward(const TokenSource<T>& source, const ModelParams<T>& params,
                         const ModelConfig& config) {
  const auto d = static_cast<Eigen::Index>(config.d_model());
  if (params.proj_clip.weight.cols() != d || params.proj_rb.weight.cols() != d) {
    throw Error(ErrorKind::shape, "projection width does not match d_model");
  }
  if (params.layers.size() != (config.arch == Arch::transformer ? config.n_layers : 0) ||
      params.head.size() != config.head_depth() + 1) {
    throw Error(ErrorKind::shape, "params do not match model config");
  }

  ForwardResult<T> out;
  ForwardTrace<T>& tr = out.trace;
  tr.d_model = config.d_model();
  tr.n_layers = params.layers.size();
  tr.n_heads = config.n_heads;
  tr.arch = config.arch;
  tr.source = source;

  const bool transformer = config.arch == Arch::transformer;
  tr.tokens = tokenize(source, params.proj_clip, params.proj_rb,
                       transformer ? params.cls : Mat<T>()).tokens;
  if (tr.tokens.cols() != d) throw Error(ErrorKind::shape, "token width does not match d_model");
  if (transformer && tr.tokens.rows() < 2) {
    throw Error(ErrorKind::shape, "token sequence must hold CLS plus at least one feature");
  }
  require_finite(tr.tokens, "token projection");

  if (transformer) {
    const auto heads = static_cast<Eigen::Index>(config.n_heads);
    const Eigen::Index dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    Mat<T> x = tr.tokens;
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
      const auto& lp = params.layers[li];
      LayerTrace<T> lt;
      lt.input = x;
      lt.attn_in = layer_norm(x, lp.norm_attn, lt.norm_attn);
      lt.q = affine(lt.attn_in, lp.query);
      lt.k = affine(lt.attn_in, lp.key);
      lt.v = affine(lt.attn_in, lp.value);
      lt.context.resize(x.rows(), d);
      for (Eigen::Index h = 0; h < heads; ++h) {
        Mat<T> s = (lt.q.middleCols(h * dh, dh) * lt.k.middleCols(h * dh, dh).transpose()) * scale;
        softmax_rows(s);
        lt.context.middleCols(h * dh, dh).noalias() = s * lt.v.middleCols(h * dh, dh);
        lt.probs.push_back(std::move(s));
      }
      lt.after_attn = x + affine(lt.context, lp.attn_out);
      lt.ffn_in = layer_norm(lt.after_attn, lp.norm_ffn, lt.norm_ffn);
      lt.pre_gelu = affine(lt.ffn_in, lp.ffn_in);
      lt.hidden = lt.pre_gelu.unaryExpr([](T v) { return gelu(v); });
      x = lt.after_attn + affine(lt.hidden, lp.ffn_out);
      require_finite(x, "encoder layer " + std::to_string(li));
      tr.layers.push_back(std::move(lt));
    }
    tr.encoded = x;
    tr.pooled = layer_norm(Mat<T>(x.topRows(1)), params.final_norm, tr.final_norm);
  } else {
    tr.pooled = tr.tokens.colwise().mean();
  }

  tr.head_act.push_back(tr.pooled);
  for (std::size_t k = 0; k + 1 < params.head.size(); ++k) {
    tr.head_pre.push_back(affine(tr.head_act.back(), params.head[k]));
    tr.head_act.push_back(tr.head_pre.back().unaryExpr([](T v) { return gelu(v); }));
  }
  tr.logit = affine(tr.head_act.back(), params.head.back())(0, 0);
  if (!std::isfinite(tr.logit)) throw Error(ErrorKind::numeric, "non-finite activation in head");
  tr.score = sigmoid(tr.logit);
  out.score = tr.score;
  return out;
}

template <typename T>
Gradients<T> backward(const ForwardTrace<T>& trace, T dscore, const ModelParams<T>& params) {
  const bool transformer = trace.arch == Arch::transformer;
  if (static_cast<std::size_t>(params.proj_clip.weight.cols()) != trace.d_model ||
      params.layers.size() != trace.n_layers || (params.cls.size() != 0) != transformer ||
      trace.head_act.size() != params.head.size()) {
    throw Error(ErrorKind::consistency, "trace was not produced with these params");
  }

  Gradients<T> g;
  g.params = params;
  for (auto* m : g.params.tensors()) m->setZero();

  const T dlogit = dscore * trace.score * (T(1) - trace.score);
  Mat<T> da = Mat<T>::Constant(1, 1, dlogit);
  da = affine_backward(da, trace.head_act.back(), params.head.back(), g.params.head.back());
  for (std::size_t k = params.head.size() - 1; k-- > 0;) {
    Mat<T> dpre = da.cwiseProduct(trace.head_pre[k].unaryExpr([](T v) { return gelu_grad(v); }));
    da = affine_backward(dpre, trace.head_act[k], params.head[k], g.params.head[k]);
  }

  const Eigen::Index rows = trace.tokens.rows();
  const auto d = static_cast<Eigen::Index>(trace.d_model);
  Mat<T> dx;
  if (transformer) {
    dx = Mat<T>::Zero(rows, d);
    dx.row(0) = layer_norm_backward(da, trace.final_norm, params.final_norm, g.params.final_norm);

    const auto heads = static_cast<Eigen::Index>(trace.n_heads);
    const Eigen::Index dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    for (std::size_t li = params.layers.size(); li-- > 0;) {
      const auto& lp = params.layers[li];
      const auto& lt = trace.layers[li];
      auto& lg = g.params.layers[li];

      // x_out = after_attn + ffn(norm(after_attn))
      Mat<T> dhidden = affine_backward(dx, lt.hidden, lp.ffn_out, lg.ffn_out);
      Mat<T> dpre = dhidden.cwiseProduct(lt.pre_gelu.unaryExpr([](T v) { return gelu_grad(v); }));
      Mat<T> dffn_in = affine_backward(dpre, lt.ffn_in, lp.ffn_in, lg.ffn_in);
      Mat<T> dafter = dx + layer_norm_backward(dffn_in, lt.norm_ffn, lp.norm_ffn, lg.norm_ffn);

      // after_attn = input + attn(norm(input))
      Mat<T> dcontext = affine_backward(dafter, lt.context, lp.attn_out, lg.attn_out);
      Mat<T> dq(rows, d), dk(rows, d), dv(rows, d);
      for (Eigen::Index h = 0; h < heads; ++h) {
        const Mat<T>& p = lt.probs[static_cast<std::size_t>(h)];
        const auto dout = dcontext.middleCols(h * dh, dh);
        dv.middleCols(h * dh, dh).noalias() = p.transpose() * dout;
        Mat<T> dp = dout * lt.v.middleCols(h * dh, dh).transpose();
        Mat<T> ds = p.cwiseProduct(dp.colwise() - p.cwiseProduct(dp).rowwise().sum());
        dq.middleCols(h * dh, dh).noalias() = (ds * lt.k.middleCols(h * dh, dh)) * scale;
        dk.middleCols(h * dh, dh).noalias() = (ds.transpose() * lt.q.middleCols(h * dh, dh)) * scale;
      }
      Mat<T> dattn_in = affine_backward(dq, lt.attn_in, lp.query, lg.query);
      dattn_in += affine_backward(dk, lt.attn_in, lp.key, lg.key);
      dattn_in += affine_backward(dv, lt.attn_in, lp.value, lg.value);
      dx = dafter + layer_norm_backward(dattn_in, lt.norm_attn, lp.norm_attn, lg.norm_attn);
    }
    g.params.cls = dx.topRows(1);
  } else {
    dx = da.replicate(rows, 1) / static_cast<T>(rows);
  }
  g.tokens = dx;

  Eigen::Index row = transformer ? 1 : 0;
  for (const auto& b : trace.source.blocks) {
    auto& pg = b.width == Width::clip ? g.params.proj_clip : g.params.proj_rb;
    const auto block = dx.middleRows(row, b.rows.rows());
    pg.weight.noalias() += b.rows.transpose() * block;
    pg.bias += block.colwise().sum();
    row += b.rows.rows();
  }
  return g;
}

template <typename T>
T fold_scores(Aggregate aggregate, const std::vector<T>& scores) {
  if (scores.empty()) throw Error(ErrorKind::domain, "no scores to aggregate");
  switch (aggregate) {
    case Aggregate::none:
      if (scores.size() != 1) throw Error(ErrorKind::domain, "aggregate none expects one score");
      return scores[0];
    case Aggregate::max:
      return *std::max_element(scores.begin(), scores.end());
    case Aggregate::mean: {
      T sum = 0;
      for (T s : scores) sum += s;
      return sum / static_cast<T>(scores.size());
    }
  }
  return scores[0];
}

template <typename T>
SampleTrace<T> score_sample_traced(const EmbeddingSet& e, const ModelParams<T>& params,
                                   const ModelConfig& config) {
  SampleTrace<T> st;
  st.aggregate = config.aggregate;
  if (config.aggregate == Aggregate::none) {
    auto r = forward(build_token_source<T>(e, config.features), params, config);
    st.part_scores.push_back(r.score);
    st.parts.push_back(std::move(r.trace));
  } else {
    SimVecConfig per_ref = config.features;
    if (per_ref.mode == FeatureMode::full) per_ref.mode = FeatureMode::single_ref;
    if (e.num_refs() > config.features.max_refs) {
      throw Error(ErrorKind::validation, "sample exceeds max_refs");
    }
    for (std::size_t i = 0; i < e.num_refs(); ++i) {
      const std::size_t idx[] = {i};
      auto r = forward(build_token_source<T>(select_references(e, idx), per_ref), params, config);
      st.part_scores.push_back(r.score);
      st.parts.push_back(std::move(r.trace));
    }
  }
  st.score = fold_scores(st.aggregate == Aggregate::none ? Aggregate::none : st.aggregate,
                         st.part_scores);
  return st;
}

template <typename T>
void backward_sample(const SampleTrace<T>& trace, T dscore, const ModelParams<T>& params,
                     ModelParams<T>& grads) {
  switch (trace.aggregate) {
    case Aggregate::none:
      add_into(grads, backward(trace.parts[0], dscore, params).params, T(1));
      break;
    case Aggregate::max: {
      auto it = std::max_element(trace.part_scores.begin(), trace.part_scores.end());
      const auto i = static_cast<std::size_t>(it - trace.part_scores.begin());
      add_into(grads, backward(trace.parts[i], dscore, params).params, T(1));
      break;
    }
    case Aggregate::mean: {
      const T share = dscore / static_cast<T>(trace.parts.size());
      for (const auto& p : trace.parts) add_into(grads, backward(p, share, params).params, T(1));
      break;
    }
  }
}

template <typename T>
T score_sample(const EmbeddingSet& e, const ModelParams<T>& params, const ModelConfig& config) {
  return score_sample_traced(e, params, config).score;
}

#define CAPSCORE_INSTANTIATE(T)                                                                  \
  template struct ModelParams<T>;                                                                \
  template ModelParams<T> zero_params<T>(const ModelConfig&);                                    \
  template ForwardResult<T> forward<T>(const TokenSource<T>&, const ModelParams<T>&,             \
                                       const ModelConfig&);                                      \
  template Gradients<T> backward<T>(const ForwardTrace<T>&, T, const ModelParams<T>&);           \
  template T fold_scores<T>(Aggregate, const std::vector<T>&);                                   \
  template SampleTrace<T> score_sample_traced<T>(const EmbeddingSet&, const ModelParams<T>&,     \
                                                 const ModelConfig&);                            \
  template void backward_sample<T>(const SampleTrace<T>&, T, const ModelParams<T>&,              \
                                   ModelParams<T>&);                                             \
  template T score_sample<T>(const EmbeddingSet&, const ModelParams<T>&, const ModelConfig&);

CAPSCORE_INSTANTIATE(float)
CAPSCORE_INSTANTIATE(double)

#undef CAPSCORE_INSTANTIATE

template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

}  // namespace capscore
