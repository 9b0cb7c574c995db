#include "ucvme/rng.hpp"

#include <cmath>
#include <numbers>

#include "ucvme/errors.hpp"

namespace ucvme {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) noexcept : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::standard_normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::substream(std::string_view tag) const noexcept {
  std::uint64_t mix = seed_ ^ fnv1a64(tag);
  return Rng(splitmix64(mix));
}

Rng Rng::substream(std::uint64_t index) const noexcept {
  std::uint64_t mix = seed_ ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  return Rng(splitmix64(mix));
}

Matrix sample_dropout_mask(Rng& rng, std::size_t rows, std::size_t cols, double p) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ParameterError("sample_dropout_mask: p must lie in [0, 1), got " + std::to_string(p));
  }
  Matrix mask(rows, cols, 1.0);
  if (p == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& v : mask.data()) v = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

double gaussian_sample(Rng& rng, double mean, double std) {
  if (!(std >= 0.0)) {
    throw ParameterError("gaussian_sample: std must be >= 0, got " + std::to_string(std));
  }
  if (std == 0.0) return mean;
  return mean + std * rng.standard_normal();
}

}  // namespace ucvme
