#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace analogion {

/// Portable seeded generator (xoshiro256**). The standard distributions are
/// implementation-defined, so every draw used by the pipeline goes through
/// the members below to keep outputs byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound);
  /// Uniform real in [0, 1).
  double uniform();
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Independent child seed for a labelled sub-stream (fold index, source...).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace analogion
