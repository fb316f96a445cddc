#include "capscore/error.h"
#include "capscore/eval_stats.h"
#include "capscore/rng.h"
#include "oracles.h"

#include <gtest/gtest.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <thread>

using namespace capscore;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no capscore::Error thrown";
  return ErrorKind::io;
}

// Scores carried in the first entry of c_clip, so scorers can be hand-built.
EmbeddingSet tagged(float value, std::size_t n_refs) {
  EmbeddingSet e;
  e.v = {0};
  e.c_clip = {value};
  e.c_rb = {0};
  for (std::size_t i = 0; i < n_refs; ++i) {
    e.r_clip.push_back({static_cast<float>(i)});
    e.r_rb.push_back({static_cast<float>(i)});
  }
  return e;
}

double read_tag(const EmbeddingSet& e) { return e.c_clip[0]; }

std::vector<FoilItem> foil_items(std::size_t n, std::size_t n_refs) {
  std::vector<FoilItem> items;
  for (std::size_t i = 0; i < n; ++i) items.push_back({"f" + std::to_string(i), tagged(1, n_refs), tagged(0, n_refs)});
  return items;
}

std::vector<double> random_ranks(std::mt19937_64& gen, std::size_t n, int levels) {
  std::uniform_int_distribution<int> d(0, levels - 1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

}  // namespace

TEST(Kendall, Examples) {
  std::vector<double> x{1, 2, 3}, up{10, 20, 30}, down{3, 2, 1};
  EXPECT_DOUBLE_EQ(kendall_tau_b(x, up), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau_b(x, down), -1.0);
  std::vector<double> tx{1, 1, 2, 2}, ty{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(kendall_tau_c(tx, ty), oracle::tau_c(tx, ty));
  EXPECT_DOUBLE_EQ(kendall_tau_c(tx, ty), 1.0);  // C=4, D=0, n=4, m=2
  std::vector<double> ry(ty.rbegin(), ty.rend());
  EXPECT_DOUBLE_EQ(kendall_tau_c(tx, ry), -1.0);
}

TEST(Kendall, CountsMatchAllPairs) {
  std::mt19937_64 gen(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + gen() % 60;
    auto x = random_ranks(gen, n, 1 + t % 7);
    auto y = random_ranks(gen, n, 2 + t % 5);
    const auto c = kendall_counts(x, y);
    const auto o = oracle::all_pairs(x, y);
    EXPECT_EQ(c.concordant, o.concordant);
    EXPECT_EQ(c.discordant, o.discordant);
    EXPECT_EQ(c.ties_x, o.ties_x);
    EXPECT_EQ(c.ties_y, o.ties_y);
    EXPECT_EQ(c.concordant + c.discordant + c.ties_x + c.ties_y + c.ties_xy,
              static_cast<std::int64_t>(n * (n - 1) / 2));
    EXPECT_EQ(count_distinct(x), oracle::distinct(x));
  }
}

TEST(Kendall, MatchesOracleExactly) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> normal;
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + gen() % 199;
    std::vector<double> x, y;
    if (t % 2 == 0) {
      x = random_ranks(gen, n, 3 + t % 11);
      y = random_ranks(gen, n, 4 + t % 13);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        x.push_back(normal(gen));
        y.push_back(0.5 * x.back() + normal(gen));
      }
    }
    if (oracle::distinct(x) < 2 || oracle::distinct(y) < 2) continue;
    EXPECT_EQ(kendall_tau_b(x, y), oracle::tau_b(x, y));
    EXPECT_EQ(kendall_tau_c(x, y), oracle::tau_c(x, y));
    ++checked;
  }
  EXPECT_GT(checked, 250);
}

TEST(Kendall, SymmetryAndSignFlip) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x, y, neg;
    for (int i = 0; i < 40; ++i) {
      x.push_back(normal(gen));
      y.push_back(normal(gen));
      neg.push_back(-y.back());
    }
    EXPECT_DOUBLE_EQ(kendall_tau_b(x, y), kendall_tau_b(y, x));
    EXPECT_DOUBLE_EQ(kendall_tau_b(x, neg), -kendall_tau_b(x, y));
    const double tb = kendall_tau_b(x, y);
    EXPECT_LE(std::abs(tb), 1.0);
  }
}

TEST(Kendall, DomainErrors) {
  std::vector<double> one{1}, two{1, 2}, three{1, 2, 3}, flat{4, 4};
  EXPECT_EQ(kind_of([&] { kendall_tau_b(one, one); }), ErrorKind::domain);
  EXPECT_EQ(kind_of([&] { kendall_tau_b(two, three); }), ErrorKind::domain);
  EXPECT_EQ(kind_of([&] { kendall_tau_b(flat, flat); }), ErrorKind::domain);
  EXPECT_EQ(kind_of([&] { kendall_tau_c(flat, two); }), ErrorKind::domain);
  std::vector<double> bad{1, std::nan("")};
  EXPECT_EQ(kind_of([&] { kendall_tau_c(bad, two); }), ErrorKind::domain);
}

TEST(Foil, OracleConstantAndTies) {
  auto items = foil_items(20, 4);
  EXPECT_DOUBLE_EQ(foil_accuracy(read_tag, items, 1), 100.0);
  EXPECT_DOUBLE_EQ(foil_accuracy(read_tag, items, 4), 100.0);
  EXPECT_DOUBLE_EQ(foil_accuracy([](const EmbeddingSet&) { return 0.7; }, items, 1), 0.0);
  EXPECT_DOUBLE_EQ(foil_accuracy([](const EmbeddingSet& e) { return -read_tag(e); }, items, 1), 0.0);
}

TEST(Foil, UsesFirstReferencesForBoth) {
  auto items = foil_items(3, 5);
  std::vector<std::size_t> seen;
  auto pairs = score_foil_pairs(
      [&](const EmbeddingSet& e) {
        EXPECT_EQ(e.num_refs(), 4u);
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(e.r_clip[i][0], static_cast<float>(i));
        return read_tag(e);
      },
      items, 4);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[2].id, "f2");
  EXPECT_EQ(pairs[0].correct_score, 1.0);
  EXPECT_EQ(pairs[0].foil_score, 0.0);
}

TEST(Foil, RandomScorerNearHalf) {
  auto items = foil_items(10000, 1);
  Rng rng(77);
  const double acc = foil_accuracy([&](const EmbeddingSet&) { return rng.uniform01(); }, items, 1);
  EXPECT_NEAR(acc, 50.0, 3.0);
}

TEST(Foil, InvariantUnderOrderAndMonotoneTransforms) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> normal;
  std::vector<ScoredPair> pairs;
  for (int i = 0; i < 200; ++i) pairs.push_back({"p" + std::to_string(i), normal(gen), normal(gen)});
  const double base = foil_accuracy(pairs);
  auto shuffled = pairs;
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i].id = "q" + std::to_string(i);
  EXPECT_DOUBLE_EQ(foil_accuracy(shuffled), base);
  auto transformed = pairs;
  for (auto& p : transformed) {
    p.correct_score = std::exp(3 * p.correct_score) + 1;
    p.foil_score = std::exp(3 * p.foil_score) + 1;
  }
  EXPECT_DOUBLE_EQ(foil_accuracy(transformed), base);
}

TEST(Foil, Errors) {
  auto items = foil_items(2, 1);
  EXPECT_EQ(kind_of([&] { foil_accuracy(read_tag, items, 4); }), ErrorKind::validation);
  EXPECT_EQ(kind_of([&] { foil_accuracy(std::span<const ScoredPair>()); }), ErrorKind::domain);
}

namespace {

std::vector<PascalCase> pascal_cases(std::size_t per_category, std::size_t refs) {
  std::vector<PascalCase> out;
  int id = 0;
  for (auto cat : {PascalCategory::HC, PascalCategory::HI, PascalCategory::HM, PascalCategory::MM}) {
    for (std::size_t i = 0; i < per_category; ++i) {
      PascalCase c;
      c.item.id = "p" + std::to_string(id++);
      c.item.category = cat;
      c.item.majority_label = i % 2 == 0 ? 'A' : 'B';
      c.a = tagged(c.item.majority_label == 'A' ? 1.0f : 0.0f, refs);
      c.b = tagged(c.item.majority_label == 'B' ? 1.0f : 0.0f, refs);
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

TEST(Pascal, OracleAndConstantScorers) {
  auto cases = pascal_cases(6, 8);
  auto oracle_result = pascal50s_accuracy(read_tag, cases, 5, 1);
  ASSERT_EQ(oracle_result.accuracy.size(), 4u);
  for (const auto& [cat, acc] : oracle_result.accuracy) {
    EXPECT_DOUBLE_EQ(acc, 100.0) << to_string(cat);
    EXPECT_EQ(oracle_result.counts[cat], 6u);
  }
  EXPECT_DOUBLE_EQ(oracle_result.mean, 100.0);
  auto constant = pascal50s_accuracy([](const EmbeddingSet&) { return 0.3; }, cases, 5, 1);
  for (const auto& [cat, acc] : constant.accuracy) EXPECT_DOUBLE_EQ(acc, 0.0);
  EXPECT_DOUBLE_EQ(constant.mean, 0.0);
  auto transformed = pascal50s_accuracy([](const EmbeddingSet& e) { return std::tanh(read_tag(e)) * 7; }, cases, 5, 1);
  EXPECT_DOUBLE_EQ(transformed.mean, 100.0);
}

TEST(Pascal, SameSeededReferencesForBothCaptions) {
  auto cases = pascal_cases(3, 10);
  std::vector<std::vector<float>> seen;
  auto record = [&](const EmbeddingSet& e) {
    std::vector<float> refs;
    for (const auto& r : e.r_clip) refs.push_back(r[0]);
    seen.push_back(refs);
    return read_tag(e);
  };
  pascal50s_accuracy(record, cases, 4, 9);
  ASSERT_EQ(seen.size(), 2 * cases.size());
  for (std::size_t i = 0; i < seen.size(); i += 2) {
    EXPECT_EQ(seen[i], seen[i + 1]);
    EXPECT_EQ(seen[i].size(), 4u);
  }
  auto first = seen;
  seen.clear();
  pascal50s_accuracy(record, cases, 4, 9);
  EXPECT_EQ(seen, first);
}

TEST(Pascal, HandComputedMixedResult) {
  auto cases = pascal_cases(2, 5);
  // Flip one HI prediction and one MM prediction.
  std::swap(cases[2].a, cases[2].b);
  std::swap(cases[7].a, cases[7].b);
  auto r = pascal50s_accuracy(read_tag, cases, 5, 3);
  EXPECT_DOUBLE_EQ(r.accuracy[PascalCategory::HC], 100.0);
  EXPECT_DOUBLE_EQ(r.accuracy[PascalCategory::HI], 50.0);
  EXPECT_DOUBLE_EQ(r.accuracy[PascalCategory::HM], 100.0);
  EXPECT_DOUBLE_EQ(r.accuracy[PascalCategory::MM], 50.0);
  EXPECT_DOUBLE_EQ(r.mean, 75.0);
}

TEST(Pascal, Errors) {
  EXPECT_EQ(kind_of([] { pascal_category_from_string("XX"); }), ErrorKind::validation);
  EXPECT_EQ(pascal_category_from_string("HM"), PascalCategory::HM);
  auto cases = pascal_cases(1, 3);
  EXPECT_EQ(kind_of([&] { pascal50s_accuracy(read_tag, cases, 5, 1); }), ErrorKind::validation);
  EXPECT_EQ(kind_of([&] { pascal50s_accuracy(read_tag, std::span<const PascalCase>(), 1, 1); }), ErrorKind::domain);
}

TEST(Bench, SleepingScorerLowerBound) {
  std::vector<EmbeddingSet> samples{tagged(0, 1)};
  auto stats = bench_inference(
      [](const EmbeddingSet&) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        return 0.0;
      },
      samples, 1);
  EXPECT_EQ(stats.count, 1u);
  EXPECT_EQ(stats.calls, 1u);
  EXPECT_GE(stats.mean_ms, 10.0);
  EXPECT_GE(stats.p95_ms, stats.median_ms);
}

TEST(Bench, MedianStableAcrossRuns) {
  std::vector<EmbeddingSet> samples(50, tagged(0, 1));
  auto work = [](const EmbeddingSet&) {
    double s = 0;
    for (int i = 0; i < 20000; ++i) s += std::sqrt(static_cast<double>(i));
    return s;
  };
  auto a = bench_inference(work, samples, 3);
  auto b = bench_inference(work, samples, 3);
  EXPECT_EQ(a.calls, 150u);
  EXPECT_LT(std::max(a.median_ms, b.median_ms), 3 * std::min(a.median_ms, b.median_ms));
}

TEST(Bench, Errors) {
  std::vector<EmbeddingSet> none;
  EXPECT_EQ(kind_of([&] { bench_inference(read_tag, none, 1); }), ErrorKind::domain);
  std::vector<EmbeddingSet> one{tagged(0, 1)};
  EXPECT_EQ(kind_of([&] { bench_inference(read_tag, one, 0); }), ErrorKind::domain);
}

TEST(Report, JsonAndSummary) {
  EvalReport r;
  r.protocol = "foil";
  r.metrics = {{"accuracy_1ref", 97.5}};
  r.sample_count = 40;
  r.config_json = R"({"seed":3})";
  r.timing = TimingStats{40, 120, 0.5, 0.4, 0.9};
  auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["protocol"], "foil");
  EXPECT_DOUBLE_EQ(j["metrics"]["accuracy_1ref"].get<double>(), 97.5);
  EXPECT_EQ(j["sample_count"], 40);
  EXPECT_EQ(j["config"]["seed"], 3);
  EXPECT_DOUBLE_EQ(j["timing"]["median_ms"].get<double>(), 0.4);
  const auto s = r.summary();
  EXPECT_NE(s.find("accuracy_1ref"), std::string::npos);
  EXPECT_NE(s.find("97.5"), std::string::npos);
}
