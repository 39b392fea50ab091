#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bbm {

namespace detail {

// Stafford variant 13 finalizer (the SplitMix64 output function).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// MurmurHash3 fmix64; used for key derivation so that keys and outputs
// go through different finalizers.
constexpr std::uint64_t fmix64(std::uint64_t k) noexcept {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdULL;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ULL;
  k ^= k >> 33;
  return k;
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Counter-based random stream. The output sequence depends only on the
/// key, so a stream can be rebuilt anywhere from (seed, replicate, lineage).
///
/// Streams split by lineage: the two children of a particle get keys derived
/// from the parent key and the child slot, never from how many numbers the
/// parent has drawn or from the order in which particles are processed.
class RngStream {
 public:
  constexpr RngStream() noexcept = default;
  constexpr explicit RngStream(std::uint64_t key) noexcept : key_(key) {}

  /// Root stream of one replicate: split(master seed, replicate index).
  static constexpr RngStream for_replicate(std::uint64_t seed,
                                           std::uint64_t replicate_id) noexcept {
    const std::uint64_t k = detail::fmix64(seed ^ detail::kGolden);
    return RngStream(detail::fmix64(k + detail::mix64(replicate_id + 0x632be59bd9b4e019ULL)));
  }

  /// Stream of child `slot` (1 or 2): the hashed form of lineage id
  /// parent*2+slot, which stays well defined past 64 generations.
  [[nodiscard]] constexpr RngStream child(unsigned slot) const noexcept {
    return RngStream(detail::fmix64(key_ * 2 + slot) ^ detail::mix64(key_ + slot));
  }

  constexpr std::uint64_t next_u64() noexcept {
    return detail::mix64(key_ + (++counter_) * detail::kGolden);
  }

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal; Box-Muller, one variate per call.
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Exponential with mean 1.
  double exponential() noexcept { return -std::log(uniform()); }

  [[nodiscard]] constexpr std::uint64_t key() const noexcept { return key_; }
  [[nodiscard]] constexpr std::uint64_t draws() const noexcept { return counter_; }

  friend constexpr bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace bbm
