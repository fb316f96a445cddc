#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace capscore {

using Embedding = std::vector<float>;

// One evaluation unit: a candidate caption for an image plus its references.
struct CaptionSample {
  std::string id;
  std::string image_ref;
  std::string candidate;
  std::vector<std::string> references;
  std::optional<double> human_score;  // normalized to [0, 1]
};

// Encoder outputs for one sample. Clip-side vectors have length d_clip, the
// sentence-encoder side d_rb; r_clip and r_rb have one entry per reference.
struct EmbeddingSet {
  Embedding v;
  Embedding c_clip;
  std::vector<Embedding> r_clip;
  Embedding c_rb;
  std::vector<Embedding> r_rb;

  std::size_t num_refs() const { return r_clip.size(); }
  std::size_t d_clip() const { return v.size(); }
  std::size_t d_rb() const { return c_rb.size(); }

  bool operator==(const EmbeddingSet&) const = default;
};

// Throws shape error unless widths agree and r_clip/r_rb counts match.
void validate_embedding_set(const EmbeddingSet& e, std::size_t d_clip, std::size_t d_rb);

// Copy of e keeping only the references at the given indices, in that order.
EmbeddingSet select_references(const EmbeddingSet& e, std::span<const std::size_t> indices);
EmbeddingSet first_references(const EmbeddingSet& e, std::size_t n);

void l2_normalize(std::span<float> x);
void l2_normalize(EmbeddingSet& e);

struct EmbeddingCache {
  static constexpr char kMagic[4] = {'S', 'V', 'E', 'C'};
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t d_clip = 512;
  std::uint32_t d_rb = 768;
  std::map<std::string, EmbeddingSet> records;

  const EmbeddingSet& at(const std::string& id) const;
  bool contains(const std::string& id) const { return records.count(id) != 0; }
};

// JSON Lines, one CaptionSample per line. Unknown fields are ignored; blank lines skipped.
std::vector<CaptionSample> load_dataset(const std::filesystem::path& path);
std::vector<CaptionSample> parse_dataset(std::string_view text);
std::string dataset_to_jsonl(std::span<const CaptionSample> samples);
void validate_sample(const CaptionSample& s);

// Five-point judgment to [0, 1] via (raw - 1) / 4.
double normalize_judgment(int raw);

// Deterministic unit vector standing in for a frozen encoder output.
Embedding stub_embed(std::string_view key, std::size_t dim, std::uint64_t seed);

std::string serialize_cache(const EmbeddingCache& cache);
EmbeddingCache deserialize_cache(std::string_view bytes, bool normalize = true);
void write_cache(const std::filesystem::path& path, const EmbeddingCache& cache);
EmbeddingCache read_cache(const std::filesystem::path& path, bool normalize = true);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> val;
  std::vector<T> test;
};

// Index-level split: seeded shuffle, then floor(n * ratio) for val and test,
// remainder to train.
Split<std::size_t> split_indices(std::size_t n, SplitRatios ratios, std::uint64_t seed);

template <typename T>
Split<T> split_dataset(std::span<const T> samples, SplitRatios ratios, std::uint64_t seed) {
  auto idx = split_indices(samples.size(), ratios, seed);
  Split<T> out;
  for (auto i : idx.train) out.train.push_back(samples[i]);
  for (auto i : idx.val) out.val.push_back(samples[i]);
  for (auto i : idx.test) out.test.push_back(samples[i]);
  return out;
}

// Whole-file helpers. write_file_atomic writes to a sibling temp file and renames.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace capscore
