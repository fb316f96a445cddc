#pragma once

#include "capscore/embedding_io.h"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace capscore {

// Pair counts over all n(n-1)/2 pairs. Pairs tied in both variables count in
// neither ties_x nor ties_y.
struct KendallCounts {
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t ties_x = 0;  // tied in x only
  std::int64_t ties_y = 0;  // tied in y only
  std::int64_t ties_xy = 0;
  std::int64_t n = 0;
};

// O(n log n): sort by (x, y), then count inversions of y with a merge sort.
KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y);

// Formulas over counts, shared with any other counting route.
double tau_b_from_counts(const KendallCounts& c);
double tau_c_from_counts(const KendallCounts& c, std::int64_t distinct_x, std::int64_t distinct_y);

double kendall_tau_b(std::span<const double> x, std::span<const double> y);
// m = min(distinct x values, distinct y values).
double kendall_tau_c(std::span<const double> x, std::span<const double> y);

std::int64_t count_distinct(std::span<const double> x);

using SampleScorer = std::function<double(const EmbeddingSet&)>;

struct ScoredPair {
  std::string id;
  double correct_score = 0.0;
  double foil_score = 0.0;
};

// Shared image and references, two candidates differing in one hallucinated word.
struct FoilItem {
  std::string id;
  EmbeddingSet correct;
  EmbeddingSet foil;
};

// Scores each pair with the first n_refs references of both sets.
std::vector<ScoredPair> score_foil_pairs(const SampleScorer& scorer, std::span<const FoilItem> items,
                                         std::size_t n_refs);

// Percentage of pairs with correct strictly above foil. Ties fail.
double foil_accuracy(std::span<const ScoredPair> pairs);
double foil_accuracy(const SampleScorer& scorer, std::span<const FoilItem> items, std::size_t n_refs);

enum class PascalCategory { HC, HI, HM, MM };

const char* to_string(PascalCategory c);
PascalCategory pascal_category_from_string(const std::string& s);

struct Pascal50sItem {
  std::string id;
  std::string image_ref;
  std::string caption_a;
  std::string caption_b;
  std::vector<std::string> references;
  PascalCategory category = PascalCategory::HC;
  char majority_label = 'A';  // 'A' or 'B'
};

struct PascalCase {
  Pascal50sItem item;
  EmbeddingSet a;  // caption_a against all references
  EmbeddingSet b;
};

struct PascalResult {
  std::map<PascalCategory, double> accuracy;  // percent
  std::map<PascalCategory, std::size_t> counts;
  double mean = 0.0;  // unweighted over the four categories
};

// Per item, draws refs_per_item reference indices with an Rng seeded once from
// seed, scores both captions on the same subset, and predicts the higher one.
PascalResult pascal50s_accuracy(const SampleScorer& scorer, std::span<const PascalCase> cases,
                                std::size_t refs_per_item, std::uint64_t seed);

struct TimingStats {
  std::size_t count = 0;  // samples
  std::size_t calls = 0;  // timed scorer invocations
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
};

// One untimed warm-up pass, then `repetitions` timed passes over samples.
TimingStats bench_inference(const SampleScorer& scorer, std::span<const EmbeddingSet> samples,
                            std::size_t repetitions);

struct EvalReport {
  std::string protocol;
  std::map<std::string, double> metrics;
  std::size_t sample_count = 0;
  std::string config_json = "{}";
  std::optional<TimingStats> timing;

  std::string to_json() const;
  // Fixed-width table for terminals.
  std::string summary() const;
};

}  // namespace capscore
