#include "capscore/embedding_io.h"

#include "capscore/error.h"
#include "capscore/rng.h"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace capscore {

using nlohmann::json;

void validate_embedding_set(const EmbeddingSet& e, std::size_t d_clip, std::size_t d_rb) {
  auto check = [](const Embedding& x, std::size_t d, const char* what) {
    if (x.size() != d) {
      throw Error(ErrorKind::shape, std::string(what) + " has length " + std::to_string(x.size()) +
                                        ", expected " + std::to_string(d));
    }
  };
  check(e.v, d_clip, "v");
  check(e.c_clip, d_clip, "c_clip");
  check(e.c_rb, d_rb, "c_rb");
  if (e.r_clip.size() != e.r_rb.size()) {
    throw Error(ErrorKind::shape, "r_clip and r_rb reference counts differ");
  }
  for (const auto& r : e.r_clip) check(r, d_clip, "r_clip");
  for (const auto& r : e.r_rb) check(r, d_rb, "r_rb");
}

EmbeddingSet select_references(const EmbeddingSet& e, std::span<const std::size_t> indices) {
  EmbeddingSet out;
  out.v = e.v;
  out.c_clip = e.c_clip;
  out.c_rb = e.c_rb;
  for (auto i : indices) {
    if (i >= e.num_refs()) throw Error(ErrorKind::domain, "reference index out of range");
    out.r_clip.push_back(e.r_clip[i]);
    out.r_rb.push_back(e.r_rb[i]);
  }
  return out;
}

EmbeddingSet first_references(const EmbeddingSet& e, std::size_t n) {
  if (n > e.num_refs()) {
    throw Error(ErrorKind::validation, "need " + std::to_string(n) + " references, have " +
                                           std::to_string(e.num_refs()));
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return select_references(e, idx);
}

void l2_normalize(std::span<float> x) {
  double ss = 0.0;
  for (float f : x) ss += static_cast<double>(f) * f;
  if (ss == 0.0) return;
  const double inv = 1.0 / std::sqrt(ss);
  for (float& f : x) f = static_cast<float>(f * inv);
}

void l2_normalize(EmbeddingSet& e) {
  l2_normalize(e.v);
  l2_normalize(e.c_clip);
  l2_normalize(e.c_rb);
  for (auto& r : e.r_clip) l2_normalize(r);
  for (auto& r : e.r_rb) l2_normalize(r);
}

const EmbeddingSet& EmbeddingCache::at(const std::string& id) const {
  auto it = records.find(id);
  if (it == records.end()) throw Error(ErrorKind::validation, "no cache entry for id '" + id + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Dataset

void validate_sample(const CaptionSample& s) {
  if (s.id.empty()) throw Error(ErrorKind::validation, "sample id is empty");
  if (s.candidate.empty()) throw Error(ErrorKind::validation, "sample '" + s.id + "': empty candidate");
  if (s.references.empty()) {
    throw Error(ErrorKind::validation, "sample '" + s.id + "': references must be non-empty");
  }
  if (s.human_score) {
    double y = *s.human_score;
    if (!(y >= 0.0 && y <= 1.0)) {
      throw Error(ErrorKind::validation,
                  "sample '" + s.id + "': human_score " + std::to_string(y) + " outside [0,1]");
    }
  }
}

namespace {

CaptionSample sample_from_json(const json& j) {
  CaptionSample s;
  s.id = j.at("id").get<std::string>();
  s.image_ref = j.at("image_ref").get<std::string>();
  s.candidate = j.at("candidate").get<std::string>();
  s.references = j.at("references").get<std::vector<std::string>>();
  if (auto it = j.find("human_score"); it != j.end() && !it->is_null()) {
    s.human_score = it->get<double>();
  }
  return s;
}

}  // namespace

std::vector<CaptionSample> parse_dataset(std::string_view text) {
  std::vector<CaptionSample> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    CaptionSample s;
    try {
      s = sample_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      validate_sample(s);
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(s.id).second) {
      throw Error(ErrorKind::validation,
                  "line " + std::to_string(line_no) + ": duplicate id '" + s.id + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CaptionSample> load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path));
}

std::string dataset_to_jsonl(std::span<const CaptionSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    json j = {{"id", s.id},
              {"image_ref", s.image_ref},
              {"candidate", s.candidate},
              {"references", s.references}};
    if (s.human_score) j["human_score"] = *s.human_score;
    out += j.dump();
    out += '\n';
  }
  return out;
}

double normalize_judgment(int raw) {
  if (raw < 1 || raw > 5) {
    throw Error(ErrorKind::domain, "judgment " + std::to_string(raw) + " outside 1..5");
  }
  return (raw - 1) / 4.0;
}

Embedding stub_embed(std::string_view key, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorKind::domain, "stub_embed: dim must be positive");
  CounterStream stream(hash_key(key, seed));
  std::vector<double> z(dim);
  double ss = 0.0;
  for (auto& x : z) {
    x = stream.next_normal();
    ss += x * x;
  }
  const double inv = 1.0 / std::sqrt(ss);
  Embedding out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(z[i] * inv);
  return out;
}

// ---------------------------------------------------------------------------
// Binary cache

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32s(std::string& out, const Embedding& xs) {
  for (float f : xs) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  Embedding f32s(std::size_t n) {
    Embedding out(n);
    for (auto& f : out) f = std::bit_cast<float>(u32());
    return out;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::corruption, "truncated file at byte " + std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_cache(const EmbeddingCache& cache) {
  std::string out(EmbeddingCache::kMagic, 4);
  put_u32(out, EmbeddingCache::kVersion);
  put_u32(out, cache.d_clip);
  put_u32(out, cache.d_rb);
  for (const auto& [id, e] : cache.records) {
    try {
      validate_embedding_set(e, cache.d_clip, cache.d_rb);
    } catch (const Error& err) {
      throw Error(ErrorKind::format, "record '" + id + "': " + err.what());
    }
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out += id;
    put_u32(out, static_cast<std::uint32_t>(e.num_refs()));
    put_f32s(out, e.v);
    put_f32s(out, e.c_clip);
    for (const auto& r : e.r_clip) put_f32s(out, r);
    put_f32s(out, e.c_rb);
    for (const auto& r : e.r_rb) put_f32s(out, r);
  }
  return out;
}

EmbeddingCache deserialize_cache(std::string_view bytes, bool normalize) {
  Reader in(bytes);
  if (bytes.size() < 4 || in.raw(4) != std::string_view(EmbeddingCache::kMagic, 4)) {
    throw Error(ErrorKind::format, "bad magic: not an embedding cache");
  }
  const std::uint32_t version = in.u32();
  if (version != EmbeddingCache::kVersion) {
    throw Error(ErrorKind::format, "unsupported cache version " + std::to_string(version));
  }
  EmbeddingCache cache;
  cache.d_clip = in.u32();
  cache.d_rb = in.u32();
  if (cache.d_clip == 0 || cache.d_rb == 0) throw Error(ErrorKind::format, "zero embedding width");

  while (!in.done()) {
    const std::uint32_t id_len = in.u32();
    std::string id(in.raw(id_len));
    const std::uint32_t n = in.u32();
    EmbeddingSet e;
    e.v = in.f32s(cache.d_clip);
    e.c_clip = in.f32s(cache.d_clip);
    for (std::uint32_t i = 0; i < n; ++i) e.r_clip.push_back(in.f32s(cache.d_clip));
    e.c_rb = in.f32s(cache.d_rb);
    for (std::uint32_t i = 0; i < n; ++i) e.r_rb.push_back(in.f32s(cache.d_rb));
    if (normalize) l2_normalize(e);
    if (!cache.records.emplace(std::move(id), std::move(e)).second) {
      throw Error(ErrorKind::format, "duplicate record id in cache");
    }
  }
  return cache;
}

void write_cache(const std::filesystem::path& path, const EmbeddingCache& cache) {
  write_file_atomic(path, serialize_cache(cache));
}

EmbeddingCache read_cache(const std::filesystem::path& path, bool normalize) {
  return deserialize_cache(read_file(path), normalize);
}

// ---------------------------------------------------------------------------

Split<std::size_t> split_indices(std::size_t n, SplitRatios ratios, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::domain, "split_dataset: empty input");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw Error(ErrorKind::domain, "split ratios must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.val));
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.test));
  if (n_val + n_test > n) throw Error(ErrorKind::domain, "split ratios leave no room for train");
  const std::size_t n_train = n - n_val - n_test;

  Split<std::size_t> out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test.assign(order.begin() + n_train + n_val, order.end());
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::io, "read failed for '" + path.string() + "'");
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorKind::io, "write failed for '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::io, "cannot rename into '" + path.string() + "'");
  }
}

}  // namespace capscore
