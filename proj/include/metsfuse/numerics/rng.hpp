#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace metsfuse::num {

/// xoshiro256** seeded through splitmix64.
///
/// Every distribution below is implemented here rather than taken from <random>,
/// whose distributions are implementation-defined, so a seed reproduces the same
/// stream on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream for a (seed, id...) tuple, e.g. (run seed, fold, epoch).
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> ids);

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); unbiased (Lemire's method with rejection).
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Marsaglia's polar method.
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
  bool bernoulli(double p) noexcept { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    shuffle(std::span<T>(items));
  }

  /// Random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stable 64-bit hash of a string (FNV-1a), for deriving stream ids from names.
std::uint64_t stream_id(std::string_view name) noexcept;

}  // namespace metsfuse::num
