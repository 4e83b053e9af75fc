#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "oracles.hpp"

using namespace omnitm;
namespace fs = std::filesystem;

namespace {

std::vector<Document> docs_of(std::initializer_list<const char*> lines) {
  std::vector<Document> out;
  for (auto l : lines) out.push_back(tokenize(l));
  return out;
}

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "omnitm_corpus_tests";
  fs::create_directories(dir);
  return dir / name;
}

FeatureSet random_set(std::size_t v, double density, SplitMix64& rng) {
  FeatureSet f(v);
  for (std::size_t i = 0; i < v; ++i)
    if (rng.next_u32() < density * 4294967296.0) f.set(i);
  return f;
}

}  // namespace

TEST(Tokenize, LowercasesAndSplitsOnWhitespace) {
  EXPECT_EQ(tokenize("The  Cat\tsat\n"), (Document{"the", "cat", "sat"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(BuildVocabulary, FrequencyThreshold) {
  auto v = build_vocabulary(docs_of({"a b", "a c"}), 2, 10);
  EXPECT_EQ(v.tokens(), std::vector<std::string>{"a"});
}

TEST(BuildVocabulary, LexicographicTieBreak) {
  auto v = build_vocabulary(docs_of({"a b", "a b"}), 1, 1);
  EXPECT_EQ(v.tokens(), std::vector<std::string>{"a"});
}

TEST(BuildVocabulary, MatchesIndependentCount) {
  SplitMix64 rng(11);
  std::vector<Document> docs;
  for (int d = 0; d < 1000; ++d) {
    Document doc;
    const auto len = 1 + rng.below(12);
    for (std::size_t i = 0; i < len; ++i) doc.push_back("t" + std::to_string(rng.below(50)));
    docs.push_back(doc);
  }
  std::map<std::string, int> freq;
  for (const auto& d : docs)
    for (const auto& t : d) freq[t]++;
  std::vector<std::pair<int, std::string>> order;
  for (const auto& [t, n] : freq) order.emplace_back(-n, t);
  std::sort(order.begin(), order.end());

  auto v = build_vocabulary(docs, 1, 50);
  ASSERT_EQ(v.size(), 50u);
  ASSERT_EQ(order.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(v.token(i), order[i].second);
    EXPECT_EQ(v.index(v.token(i)), i);
  }
}

TEST(BuildVocabulary, Errors) {
  EXPECT_THROW(build_vocabulary(docs_of({"a b"}), 2, 10), DataError);
  EXPECT_THROW(build_vocabulary({}, 1, 10), std::invalid_argument);
  EXPECT_THROW(build_vocabulary(docs_of({"a"}), 0, 10), std::invalid_argument);
  EXPECT_THROW(Vocabulary({"a", "a"}), std::invalid_argument);
  EXPECT_THROW(Vocabulary(std::vector<std::string>{}), std::invalid_argument);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  Vocabulary v({"zeta", "alpha", "mid"});
  auto path = temp_file("vocab.txt");
  v.save(path);
  auto back = Vocabulary::load(path);
  EXPECT_EQ(back.tokens(), v.tokens());
  EXPECT_EQ(back.index("mid"), 2u);
  EXPECT_THROW(back.index("nope"), DataError);
}

TEST(Binarize, PresenceSemantics) {
  Vocabulary v({"a", "b", "c"});
  EXPECT_EQ(binarize_document(tokenize("a a b"), v).to_string(), "110");
  EXPECT_EQ(binarize_document(tokenize("z z"), Vocabulary({"a"})).to_string(), "0");
}

TEST(Binarize, MatchesSetOracle) {
  std::vector<std::string> toks;
  for (int i = 0; i < 16; ++i) toks.push_back("w" + std::to_string(i));
  Vocabulary v(toks);
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Document doc;
    std::set<std::size_t> expected;
    for (int i = 0; i < 20; ++i) {
      const auto k = rng.below(20);  // indices >= 16 are out of vocabulary
      doc.push_back("w" + std::to_string(k));
      if (k < 16) expected.insert(k);
    }
    auto bits = binarize_document(doc, v);
    std::set<std::size_t> got;
    for (std::size_t i = 0; i < 16; ++i)
      if (bits.test(i)) got.insert(i);
    EXPECT_EQ(got, expected);
  }
}

TEST(PrepareExamples, SingleDocumentAccumulation) {
  // d1 contains the target (feature 0), d2 lacks it.
  std::vector<FeatureSet> docs{FeatureSet::from_string("1101"), FeatureSet::from_string("0011")};
  SplitMix64 rng(1);
  auto ex = prepare_examples(docs, 0, 200, 1, rng);
  std::size_t positives = 0;
  for (const auto& e : ex) {
    if (e.label) {
      ++positives;
      EXPECT_EQ(e.input.to_string(), "0101");
    } else {
      EXPECT_EQ(e.input.to_string(), "0011");
    }
  }
  EXPECT_GT(positives, 0u);
  EXPECT_LT(positives, 200u);
}

TEST(PrepareExamples, OrIsIdempotent) {
  std::vector<FeatureSet> docs{FeatureSet::from_string("1000"), FeatureSet::from_string("0110")};
  SplitMix64 rng(2);
  for (const auto& e : prepare_examples(docs, 0, 100, 3, rng)) {
    if (e.label) continue;
    EXPECT_EQ(e.input.to_string(), "0110");
  }
}

TEST(PrepareExamples, MatchesReplayOracle) {
  SplitMix64 gen(7);
  std::vector<FeatureSet> docs;
  for (int d = 0; d < 5; ++d) docs.push_back(random_set(12, 0.4, gen));
  docs[0].set(3);
  docs[1].reset(3);
  const std::uint32_t target = 3;

  SplitMix64 rng(42);
  auto ex = prepare_examples(docs, target, 300, 2, rng);

  // Replay: raw SplitMix64 words, top bit for the label, multiply-shift
  // rejection for each pick, ORed as plain bool vectors.
  std::uint64_t state = 42;
  auto next = [&] {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  auto below = [&](std::uint64_t n) -> std::uint64_t {
    if (n <= 1) return 0;
    const std::uint64_t limit = (0 - n) % n;
    for (;;) {
      const unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
      if (static_cast<std::uint64_t>(m) >= limit) return static_cast<std::uint64_t>(m >> 64);
    }
  };
  std::vector<std::size_t> with, without;
  for (std::size_t d = 0; d < docs.size(); ++d) (docs[d].test(target) ? with : without).push_back(d);

  ASSERT_EQ(ex.size(), 300u);
  for (const auto& e : ex) {
    const bool label = (next() >> 63) != 0;
    const auto& pool = label ? with : without;
    oracle::Bits acc(12, false);
    for (int k = 0; k < 2; ++k) {
      const auto b = oracle::to_bits(docs[pool[below(pool.size())]]);
      for (std::size_t i = 0; i < 12; ++i) acc[i] = acc[i] || b[i];
    }
    acc[target] = false;
    EXPECT_EQ(e.label, label);
    EXPECT_EQ(oracle::to_bits(e.input), acc);
  }
}

TEST(PrepareExamples, MaskAndMonotonicityProperties) {
  SplitMix64 gen(13);
  std::vector<FeatureSet> docs;
  for (int d = 0; d < 40; ++d) docs.push_back(random_set(30, 0.2, gen));
  docs[0].set(7);
  docs[1].reset(7);
  SplitMix64 a(99), b(99);
  auto ex = prepare_examples(docs, 7, 500, 4, a);
  EXPECT_EQ(ex, prepare_examples(docs, 7, 500, 4, b));
  for (const auto& e : ex) EXPECT_FALSE(e.input.test(7));

  // With a = 1 every input is one source document minus the target bit.
  SplitMix64 c(3);
  for (const auto& e : prepare_examples(docs, 7, 300, 1, c)) {
    bool found = false;
    for (auto d : docs) {
      if (d.test(7) != e.label) continue;
      d.reset(7);
      found |= d == e.input;
    }
    EXPECT_TRUE(found);
  }
}

TEST(PrepareExamples, PoolEmptyErrorsNameThePool) {
  std::vector<FeatureSet> never{FeatureSet::from_string("01"), FeatureSet::from_string("01")};
  std::vector<FeatureSet> always{FeatureSet::from_string("11"), FeatureSet::from_string("10")};
  SplitMix64 rng(1);
  try {
    prepare_examples(never, 0, 1, 1, rng);
    FAIL();
  } catch (const PoolEmptyError& e) {
    EXPECT_NE(std::string(e.what()).find("positive"), std::string::npos);
  }
  try {
    prepare_examples(always, 0, 1, 1, rng);
    FAIL();
  } catch (const PoolEmptyError& e) {
    EXPECT_NE(std::string(e.what()).find("negative"), std::string::npos);
  }
}

TEST(ExampleFile, EmptyPayloadIsHeaderOnly) {
  ExampleHeader h;
  h.feature_count = 8;
  auto path = temp_file("empty.tmex");
  write_example_file(path, h, {});
  EXPECT_EQ(fs::file_size(path), example_header_bytes);
  EXPECT_EQ(example_header_bytes, 20u);
  auto back = read_example_file(path);
  EXPECT_TRUE(back.examples.empty());
  EXPECT_EQ(back.header, h);
}

TEST(ExampleFile, BitPackingIsLittleEndian) {
  ExampleHeader h;
  h.feature_count = 8;
  h.example_count = 1;
  h.accumulation = 3;
  h.target_index = 5;
  // Features 0 and 7 set.
  FeatureSet x(8);
  x.set(0);
  x.set(7);
  auto bytes = encode_examples(h, {Example{true, x}});
  ASSERT_EQ(bytes.size(), 22u);
  EXPECT_EQ(bytes[20], 0x01);
  EXPECT_EQ(bytes[21], 0x81);
  const std::vector<std::uint8_t> header{'T', 'M', 'E', 'X', 1, 0, 8, 0, 0, 0, 1, 0, 0, 0, 3, 0, 5, 0, 0, 0};
  EXPECT_EQ(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 20), header);
}

TEST(ExampleFile, LargeRoundTripAndSize) {
  const std::uint32_t v = 40000, n = 8000;
  SplitMix64 rng(8);
  std::vector<Example> ex;
  ex.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Example e{rng.coin(), FeatureSet(v)};
    for (int k = 0; k < 60; ++k) e.input.set(rng.below(v));
    ex.push_back(std::move(e));
  }
  ExampleHeader h;
  h.feature_count = v;
  h.example_count = n;
  h.accumulation = 24;
  h.target_index = 123;
  auto path = temp_file("large.tmex");
  write_example_file(path, h, ex);
  EXPECT_EQ(fs::file_size(path), 20u + 8000u * (1u + 5000u));
  auto back = read_example_file(path, v);
  EXPECT_EQ(back.header, h);
  EXPECT_TRUE(back.examples == ex);
  fs::remove(path);
}

TEST(ExampleFile, RejectsCorruptInput) {
  ExampleHeader h;
  h.feature_count = 10;
  h.example_count = 2;
  std::vector<Example> ex{{true, FeatureSet(10)}, {false, FeatureSet(10)}};
  const auto good = encode_examples(h, ex);
  EXPECT_NO_THROW(decode_examples(good));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_examples(bad_magic), DataError);

  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(decode_examples(bad_version), DataError);

  auto truncated = good;
  truncated.pop_back();
  EXPECT_THROW(decode_examples(truncated), DataError);

  auto header_cut = io::Bytes(good.begin(), good.begin() + 12);
  EXPECT_THROW(decode_examples(header_cut), DataError);

  EXPECT_THROW(decode_examples(good, 11u), DataError);

  auto bad_label = good;
  bad_label[20] = 2;
  EXPECT_THROW(decode_examples(bad_label), DataError);

  auto padding = good;
  padding[22] = 0x80;  // bit 15 of a 10-feature record
  EXPECT_THROW(decode_examples(padding), DataError);

  EXPECT_THROW(read_example_file(temp_file("does_not_exist.tmex")), DataError);
}

TEST(ExampleFile, RandomRoundTripsAreIdentity) {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto v = static_cast<std::uint32_t>(1 + rng.below(100));
    const auto n = static_cast<std::uint32_t>(rng.below(20));
    std::vector<Example> ex;
    for (std::uint32_t i = 0; i < n; ++i) ex.push_back({rng.coin(), random_set(v, 0.3, rng)});
    ExampleHeader h;
    h.feature_count = v;
    h.example_count = n;
    h.target_index = static_cast<std::uint32_t>(rng.below(v));
    const auto bytes = encode_examples(h, ex);
    EXPECT_EQ(bytes.size(), example_header_bytes + n * example_record_bytes(v));
    auto back = decode_examples(bytes, v);
    EXPECT_EQ(back.header, h);
    EXPECT_TRUE(back.examples == ex);
  }
}

TEST(ExampleRng, DependsOnSeedAndTarget) {
  auto a = example_rng(42, 3), b = example_rng(42, 3), c = example_rng(42, 4), d = example_rng(43, 3);
  const auto x = a.next();
  EXPECT_EQ(x, b.next());
  EXPECT_NE(x, c.next());
  EXPECT_NE(x, d.next());
}
