#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fracsmp {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Maps 64 random bits to a double in the open interval (0,1).
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Counter-based standard normal keyed by (seed, path, stage): the same key
/// always yields the same draw, independent of evaluation order.
inline double keyed_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t stage) noexcept {
  const std::uint64_t key = splitmix64(splitmix64(splitmix64(seed) ^ path) ^ (stage * 0xd1b54a32d192ed03ULL));
  const double u1 = to_open_unit(splitmix64(key));
  const double u2 = to_open_unit(splitmix64(key ^ 0x632be59bd9b4e019ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Small sequential generator for test fixtures and random trial directions.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_);
  }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * to_open_unit(next()); }

 private:
  std::uint64_t state_;
};

}  // namespace fracsmp
