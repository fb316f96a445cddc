#include "capscore/error.h"
#include "capscore/simvec.h"
#include "oracles.h"

#include <gtest/gtest.h>

#include <algorithm>

using namespace capscore;

namespace {

template <typename T>
std::vector<std::vector<T>> rows(const Mat<T>& m) {
  std::vector<std::vector<T>> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.emplace_back(m.row(i).data(), m.row(i).data() + m.cols());
  }
  return out;
}

template <typename T>
Projection<T> identity_projection(std::size_t in, std::size_t d_model) {
  Projection<T> p{Mat<T>::Zero(in, d_model), Mat<T>::Zero(1, d_model)};
  for (std::size_t i = 0; i < std::min(in, d_model); ++i) p.weight(i, i) = 1;
  return p;
}

}  // namespace

TEST(Hadamard, Examples) {
  std::vector<double> a{1, 2}, b{3, 4};
  EXPECT_EQ(hadamard<double>(a, b), (std::vector<double>{3, 8}));
  std::vector<double> x{0.5, -2, 7}, ones(3, 1.0), zeros(3, 0.0);
  EXPECT_EQ(hadamard<double>(x, ones), x);
  EXPECT_EQ(hadamard<double>(x, zeros), zeros);
  std::vector<double> short_b{1};
  EXPECT_THROW(hadamard<double>(x, short_b), Error);
}

TEST(AbsDiff, Examples) {
  std::vector<double> a{1, 5}, b{4, 2};
  EXPECT_EQ(abs_diff<double>(a, b), (std::vector<double>{3, 3}));
  EXPECT_EQ(abs_diff<double>(a, a), (std::vector<double>{0, 0}));
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(6), y(6);
    for (auto& v : x) v = n(gen);
    for (auto& v : y) v = n(gen);
    EXPECT_EQ(abs_diff<double>(x, y), abs_diff<double>(y, x));
  }
  std::vector<double> short_b{1};
  try {
    abs_diff<double>(a, short_b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape);
  }
}

TEST(ExtractSimVec, HandWorkedExample) {
  EmbeddingSet e;
  e.c_clip = {1, 2};
  e.v = {3, 4};
  e.r_clip = {{0, 1}};
  e.c_rb = {1};
  e.r_rb = {{2}};
  auto f = extract_sim_vec<double>(e);
  EXPECT_EQ(rows(f.h_clip), (std::vector<std::vector<double>>{{3, 8}, {0, 2}}));
  EXPECT_EQ(rows(f.dd_clip), (std::vector<std::vector<double>>{{2, 2}, {1, 1}}));
  EXPECT_EQ(rows(f.h_rb), (std::vector<std::vector<double>>{{2}}));
  EXPECT_EQ(rows(f.dd_rb), (std::vector<std::vector<double>>{{1}}));
}

TEST(ExtractSimVec, DegenerateEquality) {
  EmbeddingSet e;
  e.c_clip = {0.5f, -1.5f, 2};
  e.v = e.c_clip;
  e.r_clip = {e.c_clip};
  e.c_rb = {1, 1};
  e.r_rb = {{1, 1}};
  auto f = extract_sim_vec<float>(e);
  EXPECT_TRUE(f.dd_clip.isZero(0));
  for (Eigen::Index i = 0; i < 2; ++i) {
    EXPECT_EQ(rows(f.h_clip)[static_cast<std::size_t>(i)], (std::vector<float>{0.25f, 2.25f, 4}));
  }
}

TEST(ExtractSimVec, GroupSizesForFourReferences) {
  std::mt19937_64 gen(2);
  auto f = extract_sim_vec<double>(oracle::random_set(gen, 5, 3, 4));
  EXPECT_EQ(f.h_clip.rows(), 5);
  EXPECT_EQ(f.dd_clip.rows(), 5);
  EXPECT_EQ(f.h_rb.rows(), 4);
  EXPECT_EQ(f.dd_rb.rows(), 4);
}

TEST(ExtractSimVec, NoReferencesIsDomainError) {
  std::mt19937_64 gen(3);
  auto e = oracle::random_set(gen, 3, 3, 0);
  try {
    extract_sim_vec<double>(e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::domain);
  }
}

template <typename T>
void check_brute_force(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  for (int t = 0; t < 200; ++t) {
    const std::size_t dc = 1 + gen() % 8, dr = 1 + gen() % 8, n = 1 + gen() % 3;
    const auto e = oracle::random_set(gen, dc, dr, n);
    const auto f = extract_sim_vec<T>(e);
    const auto want = oracle::brute_sim_vec<T>(e);
    ASSERT_EQ(rows(f.h_clip), want.h_clip);
    ASSERT_EQ(rows(f.dd_clip), want.dd_clip);
    ASSERT_EQ(rows(f.h_rb), want.h_rb);
    ASSERT_EQ(rows(f.dd_rb), want.dd_rb);
    EXPECT_GE(f.dd_clip.minCoeff(), T(0));
    EXPECT_GE(f.dd_rb.minCoeff(), T(0));
  }
}

TEST(ExtractSimVec, MatchesBruteForceFloat) { check_brute_force<float>(10); }
TEST(ExtractSimVec, MatchesBruteForceDouble) { check_brute_force<double>(11); }

TEST(Tokenize, TokenCounts) {
  std::mt19937_64 gen(4);
  SimVecConfig cfg;
  cfg.d_clip = 6;
  cfg.d_rb = 4;
  cfg.d_model = 8;
  auto clip = identity_projection<double>(6, 8);
  auto rb = identity_projection<double>(4, 8);
  Mat<double> cls = Mat<double>::Ones(1, 8);

  for (auto [mode, n, want] : {std::tuple{FeatureMode::full, 1u, 7u}, std::tuple{FeatureMode::full, 4u, 19u},
                               std::tuple{FeatureMode::raw_features, 1u, 6u},
                               std::tuple{FeatureMode::raw_features, 3u, 10u},
                               std::tuple{FeatureMode::single_ref, 1u, 7u}}) {
    cfg.mode = mode;
    auto src = build_token_source<double>(oracle::random_set(gen, 6, 4, n), cfg);
    auto tok = tokenize(src, clip, rb, cls);
    EXPECT_EQ(static_cast<std::size_t>(tok.tokens.rows()), want);
    EXPECT_EQ(expected_token_count(mode, n), want);
    EXPECT_EQ(tok.source_tags.front(), TokenGroup::cls);
    EXPECT_EQ(tok.source_tags.size(), want);
  }
}

TEST(Tokenize, GroupOrderAndLayout) {
  std::mt19937_64 gen(5);
  SimVecConfig cfg;
  cfg.d_clip = 3;
  cfg.d_rb = 2;
  cfg.d_model = 3;
  auto src = build_token_source<double>(oracle::random_set(gen, 3, 2, 2), cfg);
  auto tok = tokenize(src, identity_projection<double>(3, 3), identity_projection<double>(2, 3),
                      Mat<double>(Mat<double>::Zero(1, 3)));
  using G = TokenGroup;
  EXPECT_EQ(tok.source_tags, (std::vector<G>{G::cls, G::h_clip, G::h_clip, G::h_clip, G::dd_clip, G::dd_clip,
                                             G::dd_clip, G::h_rb, G::h_rb, G::dd_rb, G::dd_rb}));

  cfg.mode = FeatureMode::raw_features;
  auto raw = tokenize(build_token_source<double>(oracle::random_set(gen, 3, 2, 2), cfg),
                      identity_projection<double>(3, 3), identity_projection<double>(2, 3),
                      Mat<double>(Mat<double>::Zero(1, 3)));
  EXPECT_EQ(raw.source_tags, (std::vector<G>{G::cls, G::raw_c_clip, G::raw_r_clip, G::raw_r_clip, G::raw_c_rb,
                                             G::raw_r_rb, G::raw_r_rb, G::raw_v}));
}

// Under the identity projection, no full-mode token reproduces a raw input embedding.
TEST(Tokenize, ExcludesRawEmbeddings) {
  std::mt19937_64 gen(6);
  SimVecConfig cfg;
  cfg.d_clip = 5;
  cfg.d_rb = 5;
  cfg.d_model = 5;
  for (int t = 0; t < 50; ++t) {
    auto e = oracle::random_set(gen, 5, 5, 1 + t % 3);
    auto tok = tokenize(build_token_source<double>(e, cfg), identity_projection<double>(5, 5),
                        identity_projection<double>(5, 5), Mat<double>());
    std::vector<const Embedding*> raw{&e.v, &e.c_clip, &e.c_rb};
    for (const auto& r : e.r_clip) raw.push_back(&r);
    for (const auto& r : e.r_rb) raw.push_back(&r);
    for (Eigen::Index i = 0; i < tok.tokens.rows(); ++i) {
      for (const auto* r : raw) {
        Mat<double> rv = Eigen::Map<const Eigen::RowVectorXf>(r->data(), 5).cast<double>();
        EXPECT_FALSE(tok.tokens.row(i) == rv.row(0));
      }
    }
  }
}

TEST(Tokenize, ReferenceOrderEquivariance) {
  std::mt19937_64 gen(7);
  SimVecConfig cfg;
  cfg.d_clip = 4;
  cfg.d_rb = 3;
  cfg.d_model = 6;
  Projection<double> clip{Mat<double>::Random(4, 6), Mat<double>::Random(1, 6)};
  Projection<double> rb{Mat<double>::Random(3, 6), Mat<double>::Random(1, 6)};
  Mat<double> cls = Mat<double>::Random(1, 6);
  auto e = oracle::random_set(gen, 4, 3, 3);
  const std::vector<std::size_t> perm{2, 0, 1};
  auto p = select_references(e, perm);
  auto a = tokenize(build_token_source<double>(e, cfg), clip, rb, cls).tokens;
  auto b = tokenize(build_token_source<double>(p, cfg), clip, rb, cls).tokens;
  const std::size_t n = 3;
  // Row map: CLS 0; h_clip image 1, refs 2..4; dd_clip image 5, refs 6..8; h_rb 9..11; dd_rb 12..14.
  auto expect_row = [&](Eigen::Index rb_row, Eigen::Index ra_row) { EXPECT_EQ(b.row(rb_row), a.row(ra_row)); };
  expect_row(0, 0);
  expect_row(1, 1);
  expect_row(5, 5);
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = static_cast<Eigen::Index>(perm[i]);
    const auto dst = static_cast<Eigen::Index>(i);
    expect_row(2 + dst, 2 + src);
    expect_row(6 + dst, 6 + src);
    expect_row(9 + dst, 9 + src);
    expect_row(12 + dst, 12 + src);
  }
}

TEST(Tokenize, ConfigurationErrors) {
  std::mt19937_64 gen(8);
  SimVecConfig cfg;
  cfg.d_clip = 4;
  cfg.d_rb = 3;
  cfg.d_model = 6;
  auto src = build_token_source<double>(oracle::random_set(gen, 4, 3, 1), cfg);
  Projection<double> clip{Mat<double>::Zero(4, 6), Mat<double>::Zero(1, 6)};
  Projection<double> missing;
  try {
    tokenize(src, clip, missing, Mat<double>());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
  }
  Projection<double> wrong_width{Mat<double>::Zero(5, 6), Mat<double>::Zero(1, 6)};
  EXPECT_THROW(tokenize(src, clip, wrong_width, Mat<double>()), Error);

  cfg.max_refs = 2;
  try {
    build_token_source<double>(oracle::random_set(gen, 4, 3, 3), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
  cfg.mode = FeatureMode::single_ref;
  cfg.max_refs = 8;
  EXPECT_THROW(build_token_source<double>(oracle::random_set(gen, 4, 3, 2), cfg), Error);
}
