#pragma once

// Vocabulary construction, document binarization, autoencoder example
// synthesis and the per-token example file format.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "omnitm/feature_set.hpp"
#include "omnitm/io.hpp"
#include "omnitm/rng.hpp"

namespace omnitm {

using Document = std::vector<std::string>;

/// Lowercased whitespace tokenization of one line.
inline Document tokenize(std::string_view line) {
  Document out;
  std::string cur;
  for (char c : line) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// One document per line. Blank lines are kept as empty documents so line
/// numbers and document indices agree.
inline std::vector<Document> read_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::string line;
  while (std::getline(in, line)) docs.push_back(tokenize(line));
  return docs;
}

inline std::vector<Document> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return read_corpus(in);
}

class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty()) throw std::invalid_argument("Vocabulary: must contain at least one token");
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<std::uint32_t>(i)).second)
        throw std::invalid_argument("Vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }

  bool contains(const std::string& tok) const { return index_.contains(tok); }

  std::optional<std::uint32_t> find(const std::string& tok) const {
    auto it = index_.find(tok);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t index(const std::string& tok) const {
    auto it = index_.find(tok);
    if (it == index_.end()) throw DataError("token '" + tok + "' not in vocabulary");
    return it->second;
  }

  /// One token per line, in index order.
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write vocabulary " + path.string());
    for (const auto& t : tokens_) out << t << '\n';
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary " + path.string());
    std::vector<std::string> toks;
    std::string line;
    while (std::getline(in, line)) {
      auto t = tokenize(line);
      if (t.empty()) continue;
      if (t.size() != 1) throw DataError("vocabulary line has more than one token: " + line);
      toks.push_back(std::move(t.front()));
    }
    if (toks.empty()) throw DataError("empty vocabulary file " + path.string());
    return Vocabulary(std::move(toks));
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Keeps tokens occurring at least `min_count` times, most frequent first,
/// ties in lexicographic order, truncated to `max_vocab`.
inline Vocabulary build_vocabulary(const std::vector<Document>& docs, std::size_t min_count,
                                   std::size_t max_vocab) {
  if (docs.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");
  if (min_count < 1 || max_vocab < 1) throw std::invalid_argument("build_vocabulary: min_count and max_vocab must be >= 1");

  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& d : docs)
    for (const auto& t : d) ++freq[t];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq)
    if (n >= min_count) kept.emplace_back(tok, n);
  if (kept.empty()) throw DataError("build_vocabulary: no token reaches min_count");

  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (kept.size() > max_vocab) kept.resize(max_vocab);

  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens));
}

/// Presence encoding; out-of-vocabulary tokens are dropped.
inline FeatureSet binarize_document(const Document& text, const Vocabulary& vocab) {
  FeatureSet bits(vocab.size());
  for (const auto& t : text)
    if (auto i = vocab.find(t)) bits.set(*i);
  return bits;
}

inline std::vector<FeatureSet> binarize_corpus(const std::vector<Document>& docs, const Vocabulary& vocab) {
  std::vector<FeatureSet> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(binarize_document(d, vocab));
  return out;
}

struct Example {
  bool label = false;
  FeatureSet input;

  friend bool operator==(const Example&, const Example&) = default;
};

class PoolEmptyError : public DataError {
 public:
  using DataError::DataError;
};

/// Synthesizes `count` autoencoder examples for `target`.
///
/// Each label is a fair coin. The input ORs `accumulation` documents drawn
/// with replacement from the documents that contain the target (label 1) or
/// lack it (label 0). The target bit is cleared in every input.
inline std::vector<Example> prepare_examples(const std::vector<FeatureSet>& docs, std::uint32_t target,
                                             std::size_t count, std::size_t accumulation, SplitMix64& rng) {
  if (accumulation < 1) throw std::invalid_argument("prepare_examples: accumulation must be >= 1");
  if (docs.empty()) throw PoolEmptyError("prepare_examples: no documents");
  const std::size_t v = docs.front().size();
  if (target >= v) throw std::invalid_argument("prepare_examples: target index out of range");

  std::vector<std::uint32_t> with, without;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (docs[d].size() != v) throw DataError("prepare_examples: documents have inconsistent V");
    (docs[d].test(target) ? with : without).push_back(static_cast<std::uint32_t>(d));
  }
  if (with.empty()) throw PoolEmptyError("prepare_examples: positive pool empty (target never appears)");
  if (without.empty()) throw PoolEmptyError("prepare_examples: negative pool empty (target appears in every document)");

  std::vector<Example> out;
  out.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    Example ex{rng.coin(), FeatureSet(v)};
    const auto& pool = ex.label ? with : without;
    for (std::size_t k = 0; k < accumulation; ++k) ex.input |= docs[pool[rng.below(pool.size())]];
    ex.input.reset(target);
    out.push_back(std::move(ex));
  }
  return out;
}

/// Sampler for one token's examples, derived from the run seed and the
/// token's vocabulary index so tokens can be prepared in any order.
inline SplitMix64 example_rng(std::uint64_t seed, std::uint32_t target) {
  return SplitMix64(KeyedRng(seed).child(target).stream(DrawKind::accumulate, 0, 0, 0).key());
}

// ---------------------------------------------------------------------------
// Example file: "TMEX" | u16 version | u32 V | u32 count | u16 accumulation |
// u32 target | count × (u8 label, ceil(V/8) bytes, bit i of byte k = 8k+i).
// ---------------------------------------------------------------------------

struct ExampleHeader {
  std::uint16_t version = 1;
  std::uint32_t feature_count = 0;
  std::uint32_t example_count = 0;
  std::uint16_t accumulation = 1;
  std::uint32_t target_index = 0;

  friend bool operator==(const ExampleHeader&, const ExampleHeader&) = default;
};

inline constexpr std::uint16_t example_file_version = 1;
inline constexpr std::size_t example_header_bytes = 4 + 2 + 4 + 4 + 2 + 4;

inline std::size_t example_record_bytes(std::size_t v) { return 1 + (v + 7) / 8; }

inline io::Bytes encode_examples(const ExampleHeader& header, const std::vector<Example>& examples) {
  const std::size_t v = header.feature_count;
  if (header.example_count != examples.size()) throw std::invalid_argument("encode_examples: example_count mismatch");
  io::Bytes out;
  out.reserve(example_header_bytes + examples.size() * example_record_bytes(v));
  for (char c : {'T', 'M', 'E', 'X'}) out.push_back(static_cast<std::uint8_t>(c));
  io::put_le(out, header.version);
  io::put_le(out, header.feature_count);
  io::put_le(out, header.example_count);
  io::put_le(out, header.accumulation);
  io::put_le(out, header.target_index);
  for (const auto& ex : examples) {
    if (ex.input.size() != v) throw std::invalid_argument("encode_examples: example V differs from header");
    out.push_back(ex.label ? 1 : 0);
    const std::size_t start = out.size();
    out.resize(start + (v + 7) / 8, 0);
    auto words = ex.input.words();
    for (std::size_t byte = 0; byte < (v + 7) / 8; ++byte)
      out[start + byte] = static_cast<std::uint8_t>(words[byte / 8] >> (8 * (byte % 8)));
  }
  return out;
}

struct ExampleFileContents {
  ExampleHeader header;
  std::vector<Example> examples;
};

inline ExampleFileContents decode_examples(const io::Bytes& bytes, std::optional<std::uint32_t> expected_v = {},
                                           const std::string& what = "example file") {
  io::Reader r(bytes, what);
  r.expect_magic("TMEX");
  ExampleFileContents c;
  c.header.version = r.get<std::uint16_t>();
  if (c.header.version != example_file_version)
    throw DataError(what + ": unsupported version " + std::to_string(c.header.version));
  c.header.feature_count = r.get<std::uint32_t>();
  c.header.example_count = r.get<std::uint32_t>();
  c.header.accumulation = r.get<std::uint16_t>();
  c.header.target_index = r.get<std::uint32_t>();
  const std::size_t v = c.header.feature_count;
  if (expected_v && *expected_v != v)
    throw DataError(what + ": V mismatch (file " + std::to_string(v) + ", expected " + std::to_string(*expected_v) + ")");
  const std::size_t rec = example_record_bytes(v);
  if (r.remaining() != static_cast<std::size_t>(c.header.example_count) * rec)
    throw DataError(what + ": payload length does not match example_count");

  c.examples.reserve(c.header.example_count);
  for (std::uint32_t e = 0; e < c.header.example_count; ++e) {
    const std::uint8_t label = r.get<std::uint8_t>();
    if (label > 1) throw DataError(what + ": label byte must be 0 or 1");
    Example ex{label == 1, FeatureSet(v)};
    const auto* p = r.take(rec - 1);
    auto words = ex.input.words();
    for (std::size_t byte = 0; byte < rec - 1; ++byte)
      words[byte / 8] |= static_cast<std::uint64_t>(p[byte]) << (8 * (byte % 8));
    if (v % 8 != 0 && (p[rec - 2] >> (v % 8)) != 0) throw DataError(what + ": padding bits set");
    c.examples.push_back(std::move(ex));
  }
  return c;
}

inline void write_example_file(const std::filesystem::path& path, const ExampleHeader& header,
                               const std::vector<Example>& examples) {
  io::write_file(path, encode_examples(header, examples));
}

inline ExampleFileContents read_example_file(const std::filesystem::path& path,
                                             std::optional<std::uint32_t> expected_v = {}) {
  return decode_examples(io::read_file(path), expected_v, path.string());
}

}  // namespace omnitm
