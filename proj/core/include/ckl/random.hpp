#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ckl {

/// Mixes a base seed with a stream path (e.g. {epoch, graph index}) into an
/// independent 64-bit seed. Uses the splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

/// Seeded pseudo-random source. Every draw is a pure function of the seed and
/// the number of prior draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw strictly inside (0, 1).
  double uniform_open();
  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi);
  bool bernoulli(double p);
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  /// Uniformly random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);
  /// k distinct values drawn uniformly from `pool`, in draw order.
  std::vector<std::size_t> sample_without_replacement(const std::vector<std::size_t>& pool,
                                                      std::size_t k);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ckl
