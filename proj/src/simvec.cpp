#include "capscore/simvec.h"

#include "capscore/error.h"

#include <cmath>

namespace capscore {

const char* to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::full: return "full";
    case FeatureMode::raw_features: return "raw_features";
    case FeatureMode::single_ref: return "single_ref";
  }
  return "?";
}

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "full") return FeatureMode::full;
  if (s == "raw_features") return FeatureMode::raw_features;
  if (s == "single_ref") return FeatureMode::single_ref;
  throw Error(ErrorKind::configuration, "unknown feature mode '" + s + "'");
}

const char* to_string(TokenGroup g) {
  switch (g) {
    case TokenGroup::cls: return "cls";
    case TokenGroup::h_clip: return "h_clip";
    case TokenGroup::dd_clip: return "dd_clip";
    case TokenGroup::h_rb: return "h_rb";
    case TokenGroup::dd_rb: return "dd_rb";
    case TokenGroup::raw_c_clip: return "c_clip";
    case TokenGroup::raw_r_clip: return "r_clip";
    case TokenGroup::raw_c_rb: return "c_rb";
    case TokenGroup::raw_r_rb: return "r_rb";
    case TokenGroup::raw_v: return "v";
  }
  return "?";
}

void SimVecConfig::validate() const {
  if (d_clip == 0 || d_rb == 0 || d_model == 0) {
    throw Error(ErrorKind::configuration, "d_clip, d_rb and d_model must be positive");
  }
  if (max_refs == 0) throw Error(ErrorKind::configuration, "max_refs must be positive");
}

template <typename T>
std::vector<T> hadamard(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::shape, "hadamard: length mismatch");
  std::vector<T> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] * b[k];
  return out;
}

template <typename T>
std::vector<T> abs_diff(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::shape, "abs_diff: length mismatch");
  std::vector<T> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = std::abs(a[k] - b[k]);
  return out;
}

namespace {

template <typename T>
Eigen::Map<const Eigen::Matrix<float, 1, Eigen::Dynamic>> row_of(const Embedding& x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

template <typename T>
Mat<T> stack(const std::vector<const Embedding*>& rows, std::size_t width) {
  Mat<T> out(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = row_of<T>(*rows[i]).template cast<T>();
  }
  return out;
}

}  // namespace

template <typename T>
SimVecFeatures<T> extract_sim_vec(const EmbeddingSet& e) {
  const std::size_t n = e.num_refs();
  if (n == 0) throw Error(ErrorKind::domain, "extract_sim_vec: at least one reference required");
  validate_embedding_set(e, e.d_clip(), e.d_rb());

  const auto c_clip = row_of<T>(e.c_clip).template cast<T>().eval();
  const auto c_rb = row_of<T>(e.c_rb).template cast<T>().eval();

  // Row 0 of the clip groups pairs the candidate with the image, rows 1..N with references.
  std::vector<const Embedding*> clip_others{&e.v};
  for (const auto& r : e.r_clip) clip_others.push_back(&r);
  std::vector<const Embedding*> rb_others;
  for (const auto& r : e.r_rb) rb_others.push_back(&r);

  const Mat<T> clip = stack<T>(clip_others, e.d_clip());
  const Mat<T> rb = stack<T>(rb_others, e.d_rb());

  SimVecFeatures<T> f;
  f.h_clip = clip.array().rowwise() * c_clip.array();
  f.dd_clip = (clip.rowwise() - c_clip).cwiseAbs();
  f.h_rb = rb.array().rowwise() * c_rb.array();
  f.dd_rb = (rb.rowwise() - c_rb).cwiseAbs();
  return f;
}

template <typename T>
std::size_t TokenSource<T>::num_rows() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.rows.rows());
  return n;
}

std::size_t expected_token_count(FeatureMode mode, std::size_t num_refs) {
  switch (mode) {
    case FeatureMode::full:
    case FeatureMode::single_ref:
      return 4 * num_refs + 3;
    case FeatureMode::raw_features:
      return 2 * num_refs + 4;
  }
  return 0;
}

template <typename T>
TokenSource<T> build_token_source(const EmbeddingSet& e, const SimVecConfig& config) {
  const std::size_t n = e.num_refs();
  if (n == 0) throw Error(ErrorKind::domain, "sample has no references");
  if (n > config.max_refs) {
    throw Error(ErrorKind::validation, "sample has " + std::to_string(n) +
                                           " references, max_refs is " +
                                           std::to_string(config.max_refs));
  }
  if (config.mode == FeatureMode::single_ref && n != 1) {
    throw Error(ErrorKind::validation, "single_ref mode requires exactly one reference");
  }
  validate_embedding_set(e, config.d_clip, config.d_rb);

  TokenSource<T> src;
  src.num_refs = n;
  if (config.mode == FeatureMode::raw_features) {
    std::vector<const Embedding*> r_clip, r_rb;
    for (const auto& r : e.r_clip) r_clip.push_back(&r);
    for (const auto& r : e.r_rb) r_rb.push_back(&r);
    src.blocks.push_back({TokenGroup::raw_c_clip, Width::clip, stack<T>({&e.c_clip}, config.d_clip)});
    src.blocks.push_back({TokenGroup::raw_r_clip, Width::clip, stack<T>(r_clip, config.d_clip)});
    src.blocks.push_back({TokenGroup::raw_c_rb, Width::rb, stack<T>({&e.c_rb}, config.d_rb)});
    src.blocks.push_back({TokenGroup::raw_r_rb, Width::rb, stack<T>(r_rb, config.d_rb)});
    src.blocks.push_back({TokenGroup::raw_v, Width::clip, stack<T>({&e.v}, config.d_clip)});
    return src;
  }
  auto f = extract_sim_vec<T>(e);
  src.blocks.push_back({TokenGroup::h_clip, Width::clip, std::move(f.h_clip)});
  src.blocks.push_back({TokenGroup::dd_clip, Width::clip, std::move(f.dd_clip)});
  src.blocks.push_back({TokenGroup::h_rb, Width::rb, std::move(f.h_rb)});
  src.blocks.push_back({TokenGroup::dd_rb, Width::rb, std::move(f.dd_rb)});
  return src;
}

template <typename T>
SimVecTokens<T> tokenize(const TokenSource<T>& source, const Projection<T>& clip,
                         const Projection<T>& rb, const Mat<T>& cls) {
  const Eigen::Index d_model = clip.weight.cols();
  auto check = [&](const Projection<T>& p, const char* name) {
    if (p.weight.size() == 0 || p.weight.cols() != d_model || p.bias.cols() != d_model ||
        p.bias.rows() != 1) {
      throw Error(ErrorKind::configuration, std::string("missing or malformed ") + name + " projection");
    }
  };
  check(clip, "clip");
  check(rb, "rb");
  if (cls.size() != 0 && (cls.rows() != 1 || cls.cols() != d_model)) {
    throw Error(ErrorKind::configuration, "CLS embedding width does not match d_model");
  }

  const Eigen::Index has_cls = cls.size() != 0 ? 1 : 0;
  SimVecTokens<T> out;
  out.tokens.resize(static_cast<Eigen::Index>(source.num_rows()) + has_cls, d_model);
  if (has_cls) {
    out.tokens.row(0) = cls;
    out.source_tags.push_back(TokenGroup::cls);
  }
  Eigen::Index row = has_cls;
  for (const auto& b : source.blocks) {
    const Projection<T>& p = b.width == Width::clip ? clip : rb;
    if (b.rows.cols() != p.weight.rows()) {
      throw Error(ErrorKind::configuration,
                  std::string("no projection for width ") + std::to_string(b.rows.cols()));
    }
    const Eigen::Index n = b.rows.rows();
    out.tokens.middleRows(row, n).noalias() = b.rows * p.weight;
    out.tokens.middleRows(row, n).rowwise() += p.bias.row(0);
    for (Eigen::Index i = 0; i < n; ++i) out.source_tags.push_back(b.group);
    row += n;
  }
  return out;
}

#define CAPSCORE_INSTANTIATE(T)                                                               \
  template std::vector<T> hadamard<T>(std::span<const T>, std::span<const T>);                \
  template std::vector<T> abs_diff<T>(std::span<const T>, std::span<const T>);                \
  template SimVecFeatures<T> extract_sim_vec<T>(const EmbeddingSet&);                         \
  template struct TokenSource<T>;                                                             \
  template TokenSource<T> build_token_source<T>(const EmbeddingSet&, const SimVecConfig&);    \
  template SimVecTokens<T> tokenize<T>(const TokenSource<T>&, const Projection<T>&,           \
                                       const Projection<T>&, const Mat<T>&);

CAPSCORE_INSTANTIATE(float)
CAPSCORE_INSTANTIATE(double)

#undef CAPSCORE_INSTANTIATE

}  // namespace capscore
