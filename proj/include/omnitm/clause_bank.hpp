#pragma once

// Packed Tsetlin-automaton clause bank.
//
// States are stored as bit planes: for clause j and state bit p, one row of
// L = 2V bits holds bit p of every automaton in that clause. Saturating
// increments and decrements then run 64 automata per word operation, and the
// inclusion mask (state > N) is kept alongside as a derived cache.

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnitm/feature_set.hpp"
#include "omnitm/io.hpp"
#include "omnitm/rng.hpp"

namespace omnitm {

struct BankConfig {
  std::uint32_t clauses = 1;
  std::uint32_t features = 1;
  std::uint32_t state_bits = 8;
  std::uint32_t threshold = 127;   // N: literal included iff state > N
  std::int32_t vote_clip = 1;      // T
  double specificity = 1.0;        // s
  double scaling_factor = 2.0;

  std::uint32_t literals() const noexcept { return 2 * features; }
  std::uint32_t max_state() const noexcept { return (std::uint32_t{1} << state_bits) - 1; }

  static std::uint32_t default_threshold(std::uint32_t state_bits) { return (std::uint32_t{1} << (state_bits - 1)) - 1; }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("BankConfig: " + m); };
    if (state_bits < 1 || state_bits > 16) fail("state_bits must be in [1, 16]");
    if (threshold >= max_state()) fail("threshold N must satisfy 0 <= N < 2^b - 1");
    if (clauses < 1) fail("clauses must be >= 1");
    if (features < 1) fail("features must be >= 1");
    if (vote_clip < 1) fail("T must be >= 1");
    if (!(specificity >= 1.0)) fail("s must be >= 1");
    if (!(scaling_factor > 0.0)) fail("scaling_factor must be > 0");
  }

  friend bool operator==(const BankConfig&, const BankConfig&) = default;
};

/// M_TA: automaton state payload in bits, C × 2V × b.
inline std::uint64_t memory_footprint(const BankConfig& c) noexcept {
  return std::uint64_t{c.clauses} * c.literals() * c.state_bits;
}

/// Bits spent on word alignment of the in-memory bit planes, not part of M_TA.
inline std::uint64_t alignment_padding_bits(const BankConfig& c) noexcept {
  const std::uint64_t row = words_for_bits(c.literals()) * 64;
  return std::uint64_t{c.clauses} * c.state_bits * (row - c.literals());
}

/// Literal truth values for an input X: bits [0, V) are X, bits [V, 2V) are ¬X.
class LiteralSet {
 public:
  explicit LiteralSet(const FeatureSet& x) : features_(x.size()), bits_(make_literals(x)) {}

  std::size_t features() const noexcept { return features_; }
  bool operator[](std::size_t k) const noexcept { return bits_.test(k); }
  std::span<const std::uint64_t> words() const noexcept { return bits_.words(); }

 private:
  std::size_t features_;
  FeatureSet bits_;
};

/// X[k] for k < V, ¬X[k − V] otherwise.
inline bool literal_value(const FeatureSet& x, std::size_t k) {
  const std::size_t v = x.size();
  if (k >= 2 * v) throw std::out_of_range("literal_value: literal index out of range");
  return k < v ? x.test(k) : !x.test(k - v);
}

/// Empty clauses output 1 while training so they can receive feedback, and 0
/// at inference so they cannot vote vacuously.
enum class EvalMode { training, inference };

/// One clause's state histograms split at literal index V.
struct StateHistogram {
  std::vector<std::uint32_t> original;
  std::vector<std::uint32_t> negated;

  static double mean(const std::vector<std::uint32_t>& h) {
    std::uint64_t n = 0, sum = 0;
    for (std::size_t s = 0; s < h.size(); ++s) n += h[s], sum += std::uint64_t{h[s]} * s;
    return n ? static_cast<double>(sum) / static_cast<double>(n) : 0.0;
  }
  double mean_original() const { return mean(original); }
  double mean_negated() const { return mean(negated); }
};

class ClauseBank {
 public:
  using Word = std::uint64_t;

  /// Every automaton starts at N or N+1 with equal probability; weights
  /// alternate +1, −1, +1, ... over clause index.
  ClauseBank(const BankConfig& config, const KeyedRng& rng) : ClauseBank(config) {
    const std::uint32_t lits = config_.literals();
    for (std::uint32_t j = 0; j < config_.clauses; ++j) {
      const DrawStream draws = rng.stream(DrawKind::init, 0, 0, j);
      for (std::uint32_t k = 0; k < lits; ++k)
        write_state(j, k, config_.threshold + (draws.at(k) >> 31));
      refresh_included(j);
      weights_[j] = (j % 2 == 0) ? 1 : -1;
    }
  }

  /// All states zero, all weights zero. Used by snapshot decoding and tests.
  static ClauseBank zeroed(const BankConfig& config) { return ClauseBank(config); }

  const BankConfig& config() const noexcept { return config_; }
  std::uint32_t clauses() const noexcept { return config_.clauses; }
  std::uint32_t features() const noexcept { return config_.features; }
  std::uint32_t literals() const noexcept { return config_.literals(); }

  std::uint32_t state(std::uint32_t j, std::uint32_t k) const {
    check(j, k);
    std::uint32_t v = 0;
    const std::size_t w = k >> 6;
    const unsigned bit = k & 63;
    for (std::uint32_t p = 0; p < config_.state_bits; ++p) v |= static_cast<std::uint32_t>((plane(j, p)[w] >> bit) & 1U) << p;
    return v;
  }

  void set_state(std::uint32_t j, std::uint32_t k, std::uint32_t value) {
    check(j, k);
    if (value > config_.max_state()) throw std::out_of_range("set_state: value exceeds 2^b - 1");
    write_state(j, k, value);
    refresh_included(j);
  }

  /// Sets every automaton in every clause to `value`.
  void fill_states(std::uint32_t value) {
    if (value > config_.max_state()) throw std::out_of_range("fill_states: value exceeds 2^b - 1");
    for (std::uint32_t j = 0; j < config_.clauses; ++j) {
      for (std::uint32_t p = 0; p < config_.state_bits; ++p) {
        auto row = plane(j, p);
        const Word fill = ((value >> p) & 1U) ? ~Word{0} : 0;
        for (std::size_t w = 0; w < row.size(); ++w) row[w] = fill & valid_mask(w);
      }
      refresh_included(j);
    }
  }

  bool included(std::uint32_t j, std::uint32_t k) const {
    check(j, k);
    return (included_row(j)[k >> 6] >> (k & 63)) & 1U;
  }

  std::size_t included_count(std::uint32_t j) const {
    std::size_t n = 0;
    for (Word w : included_row(j)) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  std::int32_t weight(std::uint32_t j) const { return weights_.at(j); }
  void set_weight(std::uint32_t j, std::int32_t w) { weights_.at(j) = w; }
  const std::vector<std::int32_t>& weights() const noexcept { return weights_; }

  // -- evaluation -----------------------------------------------------------

  bool evaluate_clause(std::uint32_t j, const LiteralSet& lits, EvalMode mode = EvalMode::training) const {
    if (j >= config_.clauses) throw std::out_of_range("evaluate_clause: clause index out of range");
    if (lits.features() != config_.features) throw std::invalid_argument("evaluate_clause: input V mismatch");
    const auto inc = included_row(j);
    const auto lit = lits.words();
    Word any = 0;
    for (std::size_t w = 0; w < inc.size(); ++w) {
      if (inc[w] & ~lit[w]) return false;
      any |= inc[w];
    }
    return any != 0 || mode == EvalMode::training;
  }

  bool evaluate_clause(std::uint32_t j, const FeatureSet& x, EvalMode mode = EvalMode::training) const {
    return evaluate_clause(j, LiteralSet(x), mode);
  }

  FeatureSet evaluate_all(const LiteralSet& lits, EvalMode mode = EvalMode::training) const {
    FeatureSet out(config_.clauses);
    for (std::uint32_t j = 0; j < config_.clauses; ++j)
      if (evaluate_clause(j, lits, mode)) out.set(j);
    return out;
  }

  FeatureSet evaluate_all(const FeatureSet& x, EvalMode mode = EvalMode::training) const {
    return evaluate_all(LiteralSet(x), mode);
  }

  // -- feedback -------------------------------------------------------------

  /// Memorize: true literals step up with probability (s−1)/s, false literals
  /// step down with probability 1/s. Draw k decides literal k.
  void type_ia_feedback(std::uint32_t j, const LiteralSet& lits, const DrawStream& draws) {
    const auto lit = lits.words();
    for (std::size_t w = 0; w < row_words_; ++w) {
      const Word valid = valid_mask(w);
      increment_word(j, w, sampled(lit[w] & valid, w, reinforce_, draws));
      decrement_word(j, w, sampled(~lit[w] & valid, w, forget_, draws));
    }
    refresh_included(j);
  }

  /// Forget: every literal steps down with probability 1/s.
  void type_ib_feedback(std::uint32_t j, const DrawStream& draws) {
    for (std::size_t w = 0; w < row_words_; ++w) decrement_word(j, w, sampled(valid_mask(w), w, forget_, draws));
    refresh_included(j);
  }

  /// Invalidate: every false, currently excluded literal steps up by one.
  void type_ii_feedback(std::uint32_t j, const LiteralSet& lits) {
    const auto lit = lits.words();
    const auto inc = included_row(j);
    for (std::size_t w = 0; w < row_words_; ++w) increment_word(j, w, ~lit[w] & ~inc[w] & valid_mask(w));
    refresh_included(j);
  }

  // -- inspection -----------------------------------------------------------

  std::vector<StateHistogram> state_histogram() const {
    const std::size_t bins = std::size_t{config_.max_state()} + 1;
    std::vector<StateHistogram> out(config_.clauses);
    for (std::uint32_t j = 0; j < config_.clauses; ++j) {
      out[j].original.assign(bins, 0);
      out[j].negated.assign(bins, 0);
      for (std::uint32_t k = 0; k < literals(); ++k) {
        auto& h = k < config_.features ? out[j].original : out[j].negated;
        ++h[state(j, k)];
      }
    }
    return out;
  }

  /// Equal automaton states and weights (config must match too).
  friend bool operator==(const ClauseBank& a, const ClauseBank& b) {
    return a.config_ == b.config_ && a.planes_ == b.planes_ && a.weights_ == b.weights_;
  }

  /// Packed C × L × b state bit stream, LSB-first, automaton (j, k) at bit
  /// offset ((j·L + k)·b). Byte-padded at the end.
  io::Bytes packed_states() const {
    const std::uint64_t total = memory_footprint(config_);
    io::Bytes out((total + 7) / 8, 0);
    std::uint64_t pos = 0;
    for (std::uint32_t j = 0; j < config_.clauses; ++j)
      for (std::uint32_t k = 0; k < literals(); ++k) {
        const std::uint32_t s = state(j, k);
        for (std::uint32_t p = 0; p < config_.state_bits; ++p, ++pos)
          if ((s >> p) & 1U) out[pos >> 3] |= static_cast<std::uint8_t>(1U << (pos & 7));
      }
    return out;
  }

  void load_packed_states(const std::uint8_t* data, std::size_t size) {
    const std::uint64_t total = memory_footprint(config_);
    if (size != (total + 7) / 8) throw DataError("bank snapshot: state payload size mismatch");
    std::uint64_t pos = 0;
    for (std::uint32_t j = 0; j < config_.clauses; ++j) {
      for (std::uint32_t k = 0; k < literals(); ++k) {
        std::uint32_t s = 0;
        for (std::uint32_t p = 0; p < config_.state_bits; ++p, ++pos) s |= static_cast<std::uint32_t>((data[pos >> 3] >> (pos & 7)) & 1U) << p;
        write_state(j, k, s);
      }
      refresh_included(j);
    }
  }

 private:
  explicit ClauseBank(const BankConfig& config) : config_(config) {
    config_.validate();
    row_words_ = words_for_bits(config_.literals());
    planes_.assign(std::size_t{config_.clauses} * config_.state_bits * row_words_, 0);
    included_.assign(std::size_t{config_.clauses} * row_words_, 0);
    weights_.assign(config_.clauses, 0);
    reinforce_ = Threshold::from_probability((config_.specificity - 1.0) / config_.specificity);
    forget_ = Threshold::from_probability(1.0 / config_.specificity);
  }

  void check(std::uint32_t j, std::uint32_t k) const {
    if (j >= config_.clauses || k >= literals()) throw std::out_of_range("ClauseBank: index out of range");
  }

  std::span<Word> plane(std::uint32_t j, std::uint32_t p) {
    return {planes_.data() + (std::size_t{j} * config_.state_bits + p) * row_words_, row_words_};
  }
  std::span<const Word> plane(std::uint32_t j, std::uint32_t p) const {
    return {planes_.data() + (std::size_t{j} * config_.state_bits + p) * row_words_, row_words_};
  }
  std::span<Word> included_row(std::uint32_t j) { return {included_.data() + std::size_t{j} * row_words_, row_words_}; }
  std::span<const Word> included_row(std::uint32_t j) const {
    return {included_.data() + std::size_t{j} * row_words_, row_words_};
  }

  Word valid_mask(std::size_t w) const noexcept {
    const std::size_t rem = config_.literals() - w * 64;
    return rem >= 64 ? ~Word{0} : ((Word{1} << rem) - 1);
  }

  void write_state(std::uint32_t j, std::uint32_t k, std::uint32_t value) {
    const std::size_t w = k >> 6;
    const Word bit = Word{1} << (k & 63);
    for (std::uint32_t p = 0; p < config_.state_bits; ++p) {
      auto row = plane(j, p);
      row[w] = ((value >> p) & 1U) ? (row[w] | bit) : (row[w] & ~bit);
    }
  }

  /// Bits of `candidates` (word w) whose draw passes the threshold.
  static Word sampled(Word candidates, std::size_t w, const Threshold& thr, const DrawStream& draws) {
    if (thr.never() || candidates == 0) return 0;
    if (thr.always()) return candidates;
    Word out = 0;
    while (candidates) {
      const unsigned b = static_cast<unsigned>(std::countr_zero(candidates));
      candidates &= candidates - 1;
      if (thr.accepts(draws.at(w * 64 + b))) out |= Word{1} << b;
    }
    return out;
  }

  // Bit-sliced saturating counters over the automata selected by `mask`.
  void increment_word(std::uint32_t j, std::size_t w, Word mask) {
    if (!mask) return;
    const std::uint32_t bits = config_.state_bits;
    Word full = ~Word{0};
    for (std::uint32_t p = 0; p < bits; ++p) full &= plane(j, p)[w];
    Word carry = mask & ~full;
    for (std::uint32_t p = 0; p < bits && carry; ++p) {
      Word& x = plane(j, p)[w];
      const Word next = x & carry;
      x ^= carry;
      carry = next;
    }
  }

  void decrement_word(std::uint32_t j, std::size_t w, Word mask) {
    if (!mask) return;
    const std::uint32_t bits = config_.state_bits;
    Word nonzero = 0;
    for (std::uint32_t p = 0; p < bits; ++p) nonzero |= plane(j, p)[w];
    Word borrow = mask & nonzero;
    for (std::uint32_t p = 0; p < bits && borrow; ++p) {
      Word& x = plane(j, p)[w];
      const Word next = ~x & borrow;
      x ^= borrow;
      borrow = next;
    }
  }

  // included = state > N, computed MSB-first per word.
  void refresh_included(std::uint32_t j) {
    auto inc = included_row(j);
    const std::uint32_t n = config_.threshold;
    for (std::size_t w = 0; w < row_words_; ++w) {
      Word gt = 0, eq = valid_mask(w);
      for (std::uint32_t p = config_.state_bits; p-- > 0;) {
        const Word x = plane(j, p)[w];
        if ((n >> p) & 1U) {
          eq &= x;
        } else {
          gt |= eq & x;
          eq &= ~x;
        }
      }
      inc[w] = gt;
    }
  }

  BankConfig config_;
  std::size_t row_words_ = 0;
  std::vector<Word> planes_;     // [clause][bit][word]
  std::vector<Word> included_;   // [clause][word], derived from planes_
  std::vector<std::int32_t> weights_;
  Threshold reinforce_;          // (s−1)/s
  Threshold forget_;             // 1/s
};

// ---------------------------------------------------------------------------
// Snapshot file: "TMBK" | u16 version | u32 C | u32 V | u16 b | u32 N |
// packed states | C × i32 weights.
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t bank_file_version = 1;

/// Training knobs not stored in the snapshot header.
struct VoteParams {
  std::int32_t vote_clip = 1;
  double specificity = 1.0;
  double scaling_factor = 2.0;
};

inline io::Bytes encode_bank(const ClauseBank& bank) {
  const auto& c = bank.config();
  io::Bytes out{'T', 'M', 'B', 'K'};
  io::put_le(out, bank_file_version);
  io::put_le(out, c.clauses);
  io::put_le(out, c.features);
  io::put_le(out, static_cast<std::uint16_t>(c.state_bits));
  io::put_le(out, c.threshold);
  const auto states = bank.packed_states();
  out.insert(out.end(), states.begin(), states.end());
  for (auto w : bank.weights()) io::put_le(out, w);
  return out;
}

inline ClauseBank decode_bank(const io::Bytes& bytes, const VoteParams& knobs = {}, const std::string& what = "bank snapshot") {
  io::Reader r(bytes, what);
  r.expect_magic("TMBK");
  const auto version = r.get<std::uint16_t>();
  if (version != bank_file_version) throw DataError(what + ": unsupported version " + std::to_string(version));
  BankConfig c;
  c.clauses = r.get<std::uint32_t>();
  c.features = r.get<std::uint32_t>();
  c.state_bits = r.get<std::uint16_t>();
  c.threshold = r.get<std::uint32_t>();
  c.vote_clip = knobs.vote_clip;
  c.specificity = knobs.specificity;
  c.scaling_factor = knobs.scaling_factor;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(what + ": " + e.what());
  }
  auto bank = ClauseBank::zeroed(c);
  const std::size_t state_bytes = (memory_footprint(c) + 7) / 8;
  if (r.remaining() != state_bytes + std::size_t{c.clauses} * 4) throw DataError(what + ": truncated or oversized payload");
  bank.load_packed_states(r.take(state_bytes), state_bytes);
  for (std::uint32_t j = 0; j < c.clauses; ++j) bank.set_weight(j, r.get<std::int32_t>());
  return bank;
}

inline void write_bank_file(const std::filesystem::path& path, const ClauseBank& bank) {
  io::write_file(path, encode_bank(bank));
}

inline ClauseBank read_bank_file(const std::filesystem::path& path, const VoteParams& knobs = {}) {
  return decode_bank(io::read_file(path), knobs, path.string());
}

}  // namespace omnitm
