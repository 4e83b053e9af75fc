#pragma once

// Counter-based random numbers.
//
// Every draw made during training is a pure function of a key built from
// (seed, token, epoch, example, clause, draw kind) and a counter (the literal
// index). Parallel and sequential schedules therefore see the same numbers.

#include <cmath>
#include <cstdint>

namespace omnitm {

namespace detail {

inline constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h + golden_gamma + mix64(v ^ 0x2545f4914f6cdd1dULL));
}

}  // namespace detail

/// Which random decision a draw belongs to. Distinct kinds never share numbers.
enum class DrawKind : std::uint8_t {
  select = 1,       // clause update gate
  type_ia = 2,      // per-literal reinforcement / forgetting
  type_ib = 3,      // per-literal forgetting
  init = 4,         // bank initialization
  label = 5,        // example label
  accumulate = 6,   // document picks during accumulation
};

/// Fixed-point probability: `u < threshold` for a uniform 32-bit `u` has
/// probability threshold / 2^32. Stored in 64 bits so p = 1 is representable.
struct Threshold {
  std::uint64_t value = 0;

  static Threshold from_probability(double p) noexcept {
    if (!(p > 0.0)) return {0};
    if (p >= 1.0) return {std::uint64_t{1} << 32};
    return {static_cast<std::uint64_t>(std::llround(p * 4294967296.0))};
  }

  bool never() const noexcept { return value == 0; }
  bool always() const noexcept { return value >= (std::uint64_t{1} << 32); }
  bool accepts(std::uint32_t u) const noexcept { return u < value; }
};

/// A keyed stream of 32-bit draws addressed by counter.
class DrawStream {
 public:
  constexpr explicit DrawStream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint32_t at(std::uint64_t counter) const noexcept {
    return static_cast<std::uint32_t>(
        detail::mix64(key_ + (counter + 1) * detail::golden_gamma) >> 32);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
};

/// Builds stream keys from structured coordinates.
class KeyedRng {
 public:
  constexpr explicit KeyedRng(std::uint64_t seed) noexcept : seed_(seed) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }

  /// Derives a child generator (e.g. per token) from this one.
  constexpr KeyedRng child(std::uint64_t index) const noexcept {
    return KeyedRng(detail::combine(seed_, index));
  }

  constexpr DrawStream stream(DrawKind kind, std::uint64_t epoch, std::uint64_t example,
                              std::uint64_t clause) const noexcept {
    std::uint64_t h = detail::combine(seed_, static_cast<std::uint64_t>(kind));
    h = detail::combine(h, epoch);
    h = detail::combine(h, example);
    h = detail::combine(h, clause);
    return DrawStream(h);
  }

 private:
  std::uint64_t seed_;
};

/// Sequential generator for non-hot-path sampling (example preparation).
/// Fully specified arithmetic so output is identical on every platform.
class SplitMix64 {
 public:
  constexpr explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += detail::golden_gamma;
    return detail::mix64(state_);
  }

  constexpr std::uint32_t next_u32() noexcept { return static_cast<std::uint32_t>(next() >> 32); }

  /// Uniform integer in [0, bound) by 128-bit multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t limit = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = next();
      const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
      if (static_cast<std::uint64_t>(m) >= limit) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  bool coin() noexcept { return (next() >> 63) != 0; }

 private:
  std::uint64_t state_;
};

}  // namespace omnitm
