#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace moodtag {

// Thin wrapper over mt19937_64. The engine and std::seed_seq are fully
// specified by the standard; the conversions below are written out so that
// draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), unbiased. n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace moodtag
