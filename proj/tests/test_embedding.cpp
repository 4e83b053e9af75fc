#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"

using namespace omnitm;
namespace fs = std::filesystem;

namespace {

BankConfig config(std::uint32_t c, std::uint32_t v, std::uint32_t b = 8) {
  BankConfig cfg;
  cfg.clauses = c;
  cfg.features = v;
  cfg.state_bits = b;
  cfg.threshold = BankConfig::default_threshold(b);
  cfg.vote_clip = 100;
  return cfg;
}

ClauseBank random_bank(const BankConfig& cfg, SplitMix64& rng) {
  auto bank = ClauseBank::zeroed(cfg);
  for (std::uint32_t j = 0; j < cfg.clauses; ++j) {
    for (std::uint32_t k = 0; k < cfg.literals(); ++k)
      bank.set_state(j, k, static_cast<std::uint32_t>(rng.below(cfg.max_state() + 1)));
    bank.set_weight(j, static_cast<std::int32_t>(rng.below(11)) - 5);
  }
  return bank;
}

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "omnitm_embedding_tests";
  fs::create_directories(dir);
  return dir;
}

EmbeddingVector vec(std::string tok, std::vector<std::int64_t> v) { return {std::move(tok), std::move(v)}; }

}  // namespace

TEST(ExtractEmbedding, FreshEqualStatesGiveZero) {
  auto bank = ClauseBank::zeroed(config(4, 5));
  bank.fill_states(127);
  for (std::uint32_t j = 0; j < 4; ++j) bank.set_weight(j, j % 2 ? -1 : 1);
  auto e = extract_embedding(bank, "t");
  EXPECT_EQ(e.token, "t");
  EXPECT_EQ(e.values, std::vector<std::int64_t>(5, 0));
}

TEST(ExtractEmbedding, SingleClause) {
  auto bank = ClauseBank::zeroed(config(1, 3));
  bank.set_weight(0, 1);
  bank.set_state(0, 0, 200);
  bank.set_state(0, 3, 50);
  EXPECT_EQ(extract_embedding(bank, "t").values[0], 150);
}

TEST(ExtractEmbedding, SignWeightedSumMatchesSnapshotOracle) {
  auto bank = ClauseBank::zeroed(config(2, 2));
  bank.set_weight(0, 1);
  bank.set_weight(1, -1);
  // Feature 1: clause 0 diff +10, clause 1 diff −4.
  bank.set_state(0, 1, 110);
  bank.set_state(0, 3, 100);
  bank.set_state(1, 1, 96);
  bank.set_state(1, 3, 100);
  const auto file = temp_dir() / "two_clause.tmbk";
  write_bank_file(file, bank);
  const auto table = oracle::parse_snapshot(io::read_file(file));
  EXPECT_EQ(oracle::embedding(table)[1], 14);
  EXPECT_EQ(extract_embedding(read_bank_file(file), "t").values[1], 14);
}

TEST(ExtractEmbedding, MatchesOracleOnRandomBanks) {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cfg = config(1 + rng.below(12), 1 + rng.below(70), 1 + rng.below(12));
    auto bank = random_bank(cfg, rng);
    const auto table = oracle::parse_snapshot(encode_bank(bank));
    EXPECT_EQ(extract_embedding(bank, "t").values, oracle::embedding(table));
  }
}

TEST(ExtractEmbedding, ZeroWeightClausesDoNotContribute) {
  auto bank = ClauseBank::zeroed(config(2, 1));
  bank.set_state(0, 0, 9);
  bank.set_weight(0, 0);
  bank.set_state(1, 0, 5);
  bank.set_weight(1, 7);
  // Only the sign of w is used, not its magnitude.
  EXPECT_EQ(extract_embedding(bank, "t").values[0], 5);
}

TEST(ExtractEmbedding, ReflectionNegates) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cfg = config(1 + rng.below(8), 1 + rng.below(30), 1 + rng.below(10));
    auto bank = random_bank(cfg, rng);
    auto reflected = bank;
    for (std::uint32_t j = 0; j < cfg.clauses; ++j)
      for (std::uint32_t k = 0; k < cfg.literals(); ++k) reflected.set_state(j, k, cfg.max_state() - bank.state(j, k));
    auto a = extract_embedding(bank, "t").values;
    const auto b = extract_embedding(reflected, "t").values;
    for (auto& x : a) x = -x;
    EXPECT_EQ(a, b);
  }
}

TEST(ExtractEmbedding, UsesSubThresholdStates) {
  // Same included set (nothing included), different excluded states.
  auto a = ClauseBank::zeroed(config(1, 2));
  auto b = ClauseBank::zeroed(config(1, 2));
  a.set_weight(0, 1);
  b.set_weight(0, 1);
  a.fill_states(60);
  b.fill_states(60);
  b.set_state(0, 2, 10);
  for (std::uint32_t k = 0; k < 4; ++k) EXPECT_EQ(a.included(0, k), b.included(0, k));
  EXPECT_NE(extract_embedding(a, "t").values, extract_embedding(b, "t").values);
  EXPECT_EQ(extract_embedding(b, "t").values[0], 50);
}

TEST(ExtractEmbedding, DeterministicAcrossSnapshots) {
  SplitMix64 rng(8);
  auto bank = random_bank(config(6, 40, 8), rng);
  const auto again = decode_bank(encode_bank(bank));
  EXPECT_EQ(extract_embedding(bank, "t"), extract_embedding(again, "t"));
}

TEST(ExtractEmbedding, RejectsDimensionMismatch) {
  auto bank = ClauseBank::zeroed(config(1, 3));
  EXPECT_THROW(extract_embedding(bank, "t", 4), std::invalid_argument);
  EXPECT_NO_THROW(extract_embedding(bank, "t", 3));
}

TEST(Cosine, Examples) {
  const auto e = vec("a", {3, -1, 2});
  const auto neg = vec("b", {-3, 1, -2});
  EXPECT_DOUBLE_EQ(cosine_similarity(e, e), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(e, neg), -1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(vec("x", {1, 0}), vec("y", {0, 1})), 0.0);
  EXPECT_NEAR(cosine_similarity(vec("x", {1, 1}), vec("y", {1, 0})), 1 / std::sqrt(2.0), 1e-15);
}

TEST(Cosine, ZeroVectorErrorNamesToken) {
  try {
    cosine_similarity(vec("alpha", {1, 2}), vec("ghost", {0, 0}));
    FAIL() << "expected ZeroVectorError";
  } catch (const ZeroVectorError& err) {
    EXPECT_NE(std::string(err.what()).find("ghost"), std::string::npos);
  }
  EXPECT_THROW(cosine_similarity(vec("a", {1}), vec("b", {1, 2})), std::invalid_argument);
}

TEST(Cosine, ScaleInvariant) {
  SplitMix64 rng(4);
  for (int t = 0; t < 100; ++t) {
    EmbeddingVector a{"a", {}}, b{"b", {}};
    for (int i = 0; i < 10; ++i) {
      a.values.push_back(static_cast<std::int64_t>(rng.below(201)) - 100);
      b.values.push_back(static_cast<std::int64_t>(rng.below(201)) - 100);
    }
    a.values[0] = 1000;
    auto scaled = a;
    for (auto& x : scaled.values) x *= 7;
    const double c = cosine_similarity(a, b);
    EXPECT_NEAR(cosine_similarity(scaled, b), c, 1e-12);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(EmbeddingMatrix, RejectsMixedDimensions) {
  EmbeddingMatrix m;
  m.add(vec("a", {1, 2}));
  EXPECT_THROW(m.add(vec("b", {1})), std::invalid_argument);
  EXPECT_EQ(m.size(), 1u);
  EXPECT_EQ(m.dimension(), 2u);
}

TEST(ExportEmbeddings, TsvSingleRow) {
  EmbeddingMatrix m;
  m.add(vec("tok", {3, -1}));
  const auto path = temp_dir() / "one.tsv";
  export_embeddings(m, path, EmbeddingFormat::tsv);
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], "token\tv0\tv1");
  EXPECT_EQ(lines[1], "tok\t3\t-1");
  EXPECT_EQ(load_embeddings(path), m);
}

TEST(ExportEmbeddings, EmptyMatrixCreatesNoFile) {
  const auto path = temp_dir() / "empty.tsv";
  fs::remove(path);
  EXPECT_THROW(export_embeddings(EmbeddingMatrix{}, path, EmbeddingFormat::tsv), std::invalid_argument);
  EXPECT_FALSE(fs::exists(path));
}

TEST(ExportEmbeddings, W2vRoundTrip) {
  SplitMix64 rng(44);
  EmbeddingMatrix m;
  for (int t = 0; t < 44; ++t) {
    EmbeddingVector row{"word" + std::to_string(t), {}};
    for (int i = 0; i < 30; ++i) row.values.push_back(static_cast<std::int64_t>(rng.below(20001)) - 10000);
    m.add(std::move(row));
  }
  const auto path = temp_dir() / "m.w2v";
  export_embeddings(m, path, EmbeddingFormat::w2v_text);

  // Generic reader: header "rows dim", then whitespace-separated rows.
  std::ifstream in(path);
  std::size_t rows = 0, dim = 0;
  in >> rows >> dim;
  EXPECT_EQ(rows, 44u);
  EXPECT_EQ(dim, 30u);
  std::size_t seen = 0;
  for (std::string tok; in >> tok; ++seen) {
    ASSERT_TRUE(m.contains(tok));
    for (std::size_t i = 0; i < dim; ++i) {
      double x;
      ASSERT_TRUE(in >> x);
      EXPECT_EQ(static_cast<std::int64_t>(x), m.at(tok).values[i]);
    }
  }
  EXPECT_EQ(seen, 44u);
  EXPECT_EQ(load_embeddings(path), m);
}

TEST(LoadEmbeddings, RejectsMalformed) {
  std::istringstream bad_header("x y\n");
  EXPECT_THROW(load_embeddings(bad_header), DataError);
  std::istringstream bad_count("2 1\na 1\n");
  EXPECT_THROW(load_embeddings(bad_count), DataError);
  std::istringstream bad_value("token\tv0\na\tq\n");
  EXPECT_THROW(load_embeddings(bad_value), DataError);
  std::istringstream ragged("token\tv0\tv1\na\t1\t2\nb\t1\n");
  EXPECT_THROW(load_embeddings(ragged), DataError);
  EXPECT_EQ(parse_embedding_format("w2v-text"), EmbeddingFormat::w2v_text);
  EXPECT_THROW(parse_embedding_format("csv"), std::invalid_argument);
}
