#include "capscore/eval_stats.h"

#include "capscore/error.h"
#include "capscore/rng.h"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace capscore {

namespace {

std::int64_t pairs_of(std::int64_t t) { return t * (t - 1) / 2; }

void check_inputs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::domain, "kendall: length mismatch");
  if (x.size() < 2) throw Error(ErrorKind::domain, "kendall: need at least two observations");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw Error(ErrorKind::domain, "kendall: non-finite value");
    }
  }
}

// Sorts v ascending, returning the number of strict inversions.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

}  // namespace

KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y) {
  check_inputs(x, y);
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  std::int64_t tied_x = 0, tied_joint = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    tied_x += pairs_of(static_cast<std::int64_t>(j - i));
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && y[order[b]] == y[order[a]]) ++b;
      tied_joint += pairs_of(static_cast<std::int64_t>(b - a));
      a = b;
    }
    i = j;
  }

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const std::int64_t swaps = merge_count(ys, buf, 0, n);

  std::int64_t tied_y = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && ys[j] == ys[i]) ++j;
    tied_y += pairs_of(static_cast<std::int64_t>(j - i));
    i = j;
  }

  KendallCounts c;
  c.n = static_cast<std::int64_t>(n);
  c.discordant = swaps;
  c.ties_xy = tied_joint;
  c.ties_x = tied_x - tied_joint;
  c.ties_y = tied_y - tied_joint;
  c.concordant = pairs_of(c.n) - tied_x - tied_y + tied_joint - swaps;
  return c;
}

std::int64_t count_distinct(std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  return static_cast<std::int64_t>(std::unique(v.begin(), v.end()) - v.begin());
}

double tau_b_from_counts(const KendallCounts& c) {
  const double num = static_cast<double>(c.concordant - c.discordant);
  const double den = std::sqrt(static_cast<double>(c.concordant + c.discordant + c.ties_x) *
                               static_cast<double>(c.concordant + c.discordant + c.ties_y));
  if (den == 0.0) throw Error(ErrorKind::domain, "tau_b: degenerate input (zero denominator)");
  return num / den;
}

double tau_c_from_counts(const KendallCounts& c, std::int64_t distinct_x, std::int64_t distinct_y) {
  const std::int64_t m = std::min(distinct_x, distinct_y);
  if (c.n < 2 || m < 2) throw Error(ErrorKind::domain, "tau_c: need at least two distinct values");
  const double num = 2.0 * static_cast<double>(m) * static_cast<double>(c.concordant - c.discordant);
  const double den = static_cast<double>(c.n) * static_cast<double>(c.n) * static_cast<double>(m - 1);
  return num / den;
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  return tau_b_from_counts(kendall_counts(x, y));
}

double kendall_tau_c(std::span<const double> x, std::span<const double> y) {
  return tau_c_from_counts(kendall_counts(x, y), count_distinct(x), count_distinct(y));
}

// ---------------------------------------------------------------------------

std::vector<ScoredPair> score_foil_pairs(const SampleScorer& scorer, std::span<const FoilItem> items,
                                         std::size_t n_refs) {
  if (n_refs == 0) throw Error(ErrorKind::validation, "n_refs must be positive");
  std::vector<ScoredPair> out;
  out.reserve(items.size());
  for (const auto& it : items) {
    if (it.correct.num_refs() < n_refs || it.foil.num_refs() < n_refs) {
      throw Error(ErrorKind::validation, "FOIL item '" + it.id + "' has fewer than " +
                                             std::to_string(n_refs) + " references");
    }
    ScoredPair p;
    p.id = it.id;
    p.correct_score = scorer(first_references(it.correct, n_refs));
    p.foil_score = scorer(first_references(it.foil, n_refs));
    if (!std::isfinite(p.correct_score) || !std::isfinite(p.foil_score)) {
      throw Error(ErrorKind::numeric, "FOIL item '" + it.id + "' produced a non-finite score");
    }
    out.push_back(std::move(p));
  }
  return out;
}

double foil_accuracy(std::span<const ScoredPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::domain, "foil_accuracy: no pairs");
  std::size_t wins = 0;
  for (const auto& p : pairs) wins += p.correct_score > p.foil_score ? 1 : 0;
  return 100.0 * static_cast<double>(wins) / static_cast<double>(pairs.size());
}

double foil_accuracy(const SampleScorer& scorer, std::span<const FoilItem> items, std::size_t n_refs) {
  return foil_accuracy(score_foil_pairs(scorer, items, n_refs));
}

const char* to_string(PascalCategory c) {
  switch (c) {
    case PascalCategory::HC: return "HC";
    case PascalCategory::HI: return "HI";
    case PascalCategory::HM: return "HM";
    case PascalCategory::MM: return "MM";
  }
  return "?";
}

PascalCategory pascal_category_from_string(const std::string& s) {
  if (s == "HC") return PascalCategory::HC;
  if (s == "HI") return PascalCategory::HI;
  if (s == "HM") return PascalCategory::HM;
  if (s == "MM") return PascalCategory::MM;
  throw Error(ErrorKind::validation, "unknown PASCAL-50S category '" + s + "'");
}

PascalResult pascal50s_accuracy(const SampleScorer& scorer, std::span<const PascalCase> cases,
                                std::size_t refs_per_item, std::uint64_t seed) {
  if (cases.empty()) throw Error(ErrorKind::domain, "pascal50s_accuracy: no items");
  if (refs_per_item == 0) throw Error(ErrorKind::validation, "refs_per_item must be positive");
  Rng rng(seed);
  std::map<PascalCategory, std::size_t> hits;
  PascalResult result;
  for (const auto& c : cases) {
    const std::size_t available = std::min(c.a.num_refs(), c.b.num_refs());
    if (refs_per_item > available) {
      throw Error(ErrorKind::validation, "item '" + c.item.id + "' has " + std::to_string(available) +
                                             " references, " + std::to_string(refs_per_item) +
                                             " requested");
    }
    if (c.item.majority_label != 'A' && c.item.majority_label != 'B') {
      throw Error(ErrorKind::validation, "item '" + c.item.id + "' has no A/B majority label");
    }
    const auto idx = rng.sample_indices(available, refs_per_item);
    const double sa = scorer(select_references(c.a, idx));
    const double sb = scorer(select_references(c.b, idx));
    const char predicted = sa > sb ? 'A' : (sb > sa ? 'B' : '?');
    result.counts[c.item.category] += 1;
    hits[c.item.category] += predicted == c.item.majority_label ? 1 : 0;
  }
  double sum = 0.0;
  for (const auto& [cat, n] : result.counts) {
    const double acc = 100.0 * static_cast<double>(hits[cat]) / static_cast<double>(n);
    result.accuracy[cat] = acc;
    sum += acc;
  }
  result.mean = sum / static_cast<double>(result.counts.size());
  return result;
}

TimingStats bench_inference(const SampleScorer& scorer, std::span<const EmbeddingSet> samples,
                            std::size_t repetitions) {
  if (samples.empty()) throw Error(ErrorKind::domain, "bench_inference: no samples");
  if (repetitions == 0) throw Error(ErrorKind::domain, "bench_inference: repetitions must be >= 1");
  volatile double sink = 0.0;
  for (const auto& s : samples) sink = sink + scorer(s);

  std::vector<double> ms;
  ms.reserve(samples.size() * repetitions);
  using clock = std::chrono::steady_clock;
  for (std::size_t r = 0; r < repetitions; ++r) {
    for (const auto& s : samples) {
      const auto t0 = clock::now();
      sink = sink + scorer(s);
      const auto t1 = clock::now();
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  }

  TimingStats t;
  t.count = samples.size();
  t.calls = ms.size();
  t.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  t.median_ms = n % 2 == 1 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  t.p95_ms = ms[std::max<std::size_t>(rank, 1) - 1];
  return t;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = protocol;
  j["metrics"] = metrics;
  j["sample_count"] = sample_count;
  j["config"] = nlohmann::json::parse(config_json);
  if (timing) {
    j["timing"] = {{"count", timing->count},     {"calls", timing->calls},
                   {"mean_ms", timing->mean_ms}, {"median_ms", timing->median_ms},
                   {"p95_ms", timing->p95_ms}};
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::summary() const {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-24s %14s\n", protocol.c_str(), "value");
  out += line;
  out += std::string(39, '-') + "\n";
  for (const auto& [name, value] : metrics) {
    std::snprintf(line, sizeof line, "%-24s %14.4f\n", name.c_str(), value);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-24s %14zu\n", "samples", sample_count);
  out += line;
  if (timing) {
    std::snprintf(line, sizeof line, "%-24s %14.4f\n%-24s %14.4f\n%-24s %14.4f\n", "mean ms/sample",
                  timing->mean_ms, "median ms/sample", timing->median_ms, "p95 ms/sample",
                  timing->p95_ms);
    out += line;
  }
  return out;
}

}  // namespace capscore
