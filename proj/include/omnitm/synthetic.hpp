#pragma once

// Synthetic corpus with designed distributional structure.
//
// Each semantic group owns a ring of context words. Its target tokens sit at
// evenly spaced ring positions, and each token's signature is the window of
// context words around its position. A document mentions one token together
// with a few words from that token's signature, plus Zipf-distributed filler.
// Two tokens are as similar as the number of signature words they share:
// neighbours on the ring overlap a lot, distant tokens little, and tokens of
// different groups not at all.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "omnitm/evalbench.hpp"
#include "omnitm/rng.hpp"

namespace omnitm::synthetic {

struct Group {
  std::string name;
  std::vector<std::string> tokens;  // scored words, evenly spaced round the context ring
};

struct CorpusDesign {
  std::vector<Group> groups;
  std::size_t context_ring = 48;     // context words per group
  std::size_t signature_radius = 12; // signature = ring positions within this distance
  std::size_t filler_vocabulary = 600;
  std::size_t documents = 5000;
  double signature_presence = 0.16;  // chance of each signature word in a document
  std::size_t filler_words = 3;
  double stray_token = 0.05;         // chance of one unrelated scored token
  std::size_t cross_pairs_per_group_pair = 8;
};

inline CorpusDesign default_design() {
  CorpusDesign d;
  d.groups = {
      {"food", {"apple", "bread", "cheese", "butter", "honey", "pasta", "salad", "soup"}},
      {"geography", {"river", "mountain", "valley", "island", "desert", "forest", "canyon", "glacier"}},
      {"vehicles", {"car", "truck", "bus", "train", "bicycle", "tractor", "scooter", "ferry"}},
  };
  return d;
}

inline std::string numbered(const std::string& prefix, std::size_t i) {
  std::string n = std::to_string(i);
  return prefix + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
}

/// Context word at ring position `pos` of group `g`.
inline std::string context_word(const CorpusDesign& d, std::size_t g, std::size_t pos) {
  return d.groups[g].name + "_" + numbered("c", pos % d.context_ring);
}

inline std::string filler_word(std::size_t i) { return numbered("w", i); }

/// Ring positions in the signature of token t of group g.
inline std::vector<std::size_t> signature(const CorpusDesign& d, std::size_t g, std::size_t t) {
  const std::size_t ring = d.context_ring;
  const std::size_t center = t * ring / d.groups[g].tokens.size();
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k <= 2 * d.signature_radius && k < ring; ++k)
    out.push_back((center + ring - d.signature_radius + k) % ring);
  return out;
}

/// Number of signature words shared by two tokens (0 across groups).
inline std::size_t shared_context(const CorpusDesign& d, std::size_t g1, std::size_t t1, std::size_t g2, std::size_t t2) {
  if (g1 != g2) return 0;
  const auto a = signature(d, g1, t1), b = signature(d, g2, t2);
  const std::set<std::size_t> sa(a.begin(), a.end());
  std::size_t n = 0;
  for (auto p : std::set<std::size_t>(b.begin(), b.end())) n += sa.count(p);
  return n;
}

/// Index into `cumulative` (running sums of weights) picked proportionally.
inline std::size_t pick_weighted(const std::vector<double>& cumulative, SplitMix64& rng) {
  const double u = static_cast<double>(rng.next() >> 11) * 0x1.0p-53 * cumulative.back();
  const auto i = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
  return std::min(i, cumulative.size() - 1);
}

inline std::vector<std::string> generate_documents(const CorpusDesign& d, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> zipf(d.filler_vocabulary);
  for (std::size_t i = 0; i < zipf.size(); ++i) zipf[i] = (i ? zipf[i - 1] : 0.0) + 1.0 / static_cast<double>(i + 1);
  const Threshold sig = Threshold::from_probability(d.signature_presence);
  const Threshold stray = Threshold::from_probability(d.stray_token);

  std::vector<std::string> docs;
  docs.reserve(d.documents);
  for (std::size_t n = 0; n < d.documents; ++n) {
    const std::size_t g = rng.below(d.groups.size());
    const std::size_t t = rng.below(d.groups[g].tokens.size());
    std::vector<std::string> words{d.groups[g].tokens[t]};
    for (auto pos : signature(d, g, t))
      if (sig.accepts(rng.next_u32())) words.push_back(context_word(d, g, pos));
    for (std::size_t f = 0; f < d.filler_words; ++f) words.push_back(filler_word(pick_weighted(zipf, rng)));
    if (stray.accepts(rng.next_u32())) {
      const std::size_t og = rng.below(d.groups.size());
      words.push_back(d.groups[og].tokens[rng.below(d.groups[og].tokens.size())]);
    }
    for (std::size_t i = words.size(); i > 1; --i) std::swap(words[i - 1], words[rng.below(i)]);
    std::string line;
    for (const auto& w : words) {
      if (!line.empty()) line.push_back(' ');
      line += w;
    }
    docs.push_back(std::move(line));
  }
  return docs;
}

/// Every intra-group pair plus a fixed sample of cross-group pairs, scored by
/// shared signature size.
inline SimilarityDataset designed_pairs(const CorpusDesign& d, std::uint64_t seed) {
  SimilarityDataset ds{"synthetic", {}};
  for (std::size_t g = 0; g < d.groups.size(); ++g) {
    const auto& toks = d.groups[g].tokens;
    for (std::size_t a = 0; a < toks.size(); ++a)
      for (std::size_t b = a + 1; b < toks.size(); ++b)
        ds.pairs.push_back({toks[a], toks[b], static_cast<double>(shared_context(d, g, a, g, b))});
  }
  SplitMix64 rng(seed ^ 0x5eedULL);
  for (std::size_t x = 0; x < d.groups.size(); ++x)
    for (std::size_t y = x + 1; y < d.groups.size(); ++y)
      for (std::size_t k = 0; k < d.cross_pairs_per_group_pair; ++k) {
        const auto& a = d.groups[x].tokens;
        const auto& b = d.groups[y].tokens;
        ds.pairs.push_back({a[rng.below(a.size())], b[rng.below(b.size())], 0.0});
      }
  return ds;
}

inline TokenGroups designed_groups(const CorpusDesign& d) {
  TokenGroups g;
  for (const auto& grp : d.groups) g[grp.name] = grp.tokens;
  return g;
}

inline std::vector<std::string> scored_tokens(const CorpusDesign& d) {
  std::vector<std::string> out;
  for (const auto& g : d.groups) out.insert(out.end(), g.tokens.begin(), g.tokens.end());
  return out;
}

/// Writes corpus.txt, pairs.tsv, groups.txt and tokens.txt into `dir`.
inline void write_bundle(const std::filesystem::path& dir, const CorpusDesign& d, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("corpus.txt");
    for (const auto& line : generate_documents(d, seed)) out << line << '\n';
  }
  {
    auto out = open("pairs.tsv");
    out << "# word1\tword2\tshared context words\n";
    for (const auto& p : designed_pairs(d, seed).pairs) out << p.first << '\t' << p.second << '\t' << p.score << '\n';
  }
  {
    auto out = open("groups.txt");
    for (const auto& g : d.groups) {
      out << g.name;
      for (const auto& t : g.tokens) out << ' ' << t;
      out << '\n';
    }
  }
  {
    auto out = open("tokens.txt");
    for (const auto& t : scored_tokens(d)) out << t << '\n';
  }
}

}  // namespace omnitm::synthetic
