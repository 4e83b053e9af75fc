#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace omnitm {

inline constexpr std::size_t words_for_bits(std::size_t bits) noexcept { return (bits + 63) / 64; }

/// Fixed-length bitset over feature indices. Bits past size() are always zero.
class FeatureSet {
 public:
  FeatureSet() = default;
  explicit FeatureSet(std::size_t size) : size_(size), words_(words_for_bits(size), 0) {}

  /// Parses "1010..." with character i giving bit i.
  static FeatureSet from_string(std::string_view bits) {
    FeatureSet out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] == '1') {
        out.set(i);
      } else if (bits[i] != '0') {
        throw std::invalid_argument("FeatureSet::from_string: expected '0' or '1'");
      }
    }
    return out;
  }

  std::size_t size() const noexcept { return size_; }

  bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1U; }
  void set(std::size_t i) noexcept { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset(std::size_t i) noexcept { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  void assign(std::size_t i, bool v) noexcept { v ? set(i) : reset(i); }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  bool none() const noexcept {
    for (auto w : words_)
      if (w) return false;
    return true;
  }

  FeatureSet& operator|=(const FeatureSet& other) {
    if (other.size_ != size_) throw std::invalid_argument("FeatureSet: size mismatch in |=");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
    return *this;
  }

  /// True iff every bit set here is also set in `other`.
  bool subset_of(const FeatureSet& other) const noexcept {
    for (std::size_t i = 0; i < words_.size(); ++i)
      if (words_[i] & ~other.words_[i]) return false;
    return true;
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }
  std::span<std::uint64_t> words() noexcept { return words_; }

  std::string to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i)
      if (test(i)) s[i] = '1';
    return s;
  }

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Literal vector of length 2V: x_0..x_{V-1} followed by their negations.
inline FeatureSet make_literals(const FeatureSet& x) {
  const std::size_t v = x.size();
  FeatureSet lits(2 * v);
  auto out = lits.words();
  auto in = x.words();
  for (std::size_t w = 0; w < in.size(); ++w) out[w] = in[w];
  // Negated half starts at bit V, which may sit mid-word.
  for (std::size_t i = 0; i < v; ++i)
    if (!x.test(i)) lits.set(v + i);
  return lits;
}

}  // namespace omnitm
