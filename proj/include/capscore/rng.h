#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace capscore {

// FNV-1a over the key bytes, folded with the seed through a splitmix64 finalizer.
std::uint64_t hash_key(std::string_view key, std::uint64_t seed);

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based stream: value k is splitmix64(key + k * golden). No hidden state
// besides the counter, so draws are reproducible from (key, index) alone.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  // Uniform in (0, 1], 53-bit resolution.
  double next_unit();
  // Box-Muller; consumes two uniforms per pair of normals.
  double next_normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Sequential generator for shuffles and sampling. Wraps mt19937_64, whose output
// sequence is fixed by the standard; the distributions are implemented here
// because the std:: ones are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound);
  // Uniform in [0, 1).
  double uniform01();
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace capscore
