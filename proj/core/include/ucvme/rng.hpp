#pragma once

#include <cstdint>
#include <string_view>

#include "ucvme/matrix.hpp"

namespace ucvme {

/// SplitMix64 step (Steele, Lea & Flood). Used for seeding and for
/// deriving substream seeds.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// 64-bit FNV-1a hash of a byte string.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Seeded pseudo-random source: xoshiro256** 1.0 (Blackman & Vigna),
/// with the 256-bit state filled from the seed by four SplitMix64 steps.
///
/// Only integer operations touch the state, so a given seed produces the
/// same stream on every platform. Doubles are formed from the top 53 bits.
/// Normal deviates use the Box-Muller transform and consume exactly two
/// uniforms each (the second deviate of the pair is discarded), which keeps
/// the call-count-to-stream-position mapping trivial.
///
/// An Rng is single-owner; never share one between threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept;
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  double standard_normal() noexcept;

  /// Independent generator for a named purpose, derived only from this
  /// generator's seed and the tag (not from its current position).
  Rng substream(std::string_view tag) const noexcept;
  /// Substream keyed by an integer index (e.g. a draw or rerun number).
  Rng substream(std::uint64_t index) const noexcept;

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t s_[4] = {0, 0, 0, 0};
};

/// Inverted-dropout mask: entries are 0 with probability p, else 1/(1-p).
/// Throws ParameterError unless 0 <= p < 1.
Matrix sample_dropout_mask(Rng& rng, std::size_t rows, std::size_t cols, double p);

/// One draw from N(mean, std^2). std == 0 returns mean exactly without
/// consuming randomness. Throws ParameterError for negative std.
double gaussian_sample(Rng& rng, double mean, double std);

}  // namespace ucvme
