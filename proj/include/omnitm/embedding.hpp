#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnitm/clause_bank.hpp"
#include "omnitm/io.hpp"

namespace omnitm {

struct EmbeddingVector {
  std::string token;
  std::vector<std::int64_t> values;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// values[i] = Σ_j sign(w_j)·(state(j, x_i) − state(j, ¬x_i)) over every
/// automaton, included or not.
inline EmbeddingVector extract_embedding(const ClauseBank& bank, const std::string& token,
                                         std::optional<std::uint32_t> expected_v = {}) {
  const std::uint32_t v = bank.features();
  if (expected_v && *expected_v != v)
    throw std::invalid_argument("extract_embedding: bank V " + std::to_string(v) + " != expected " +
                                std::to_string(*expected_v));
  EmbeddingVector out{token, std::vector<std::int64_t>(v, 0)};
  for (std::uint32_t j = 0; j < bank.clauses(); ++j) {
    const std::int32_t w = bank.weight(j);
    if (w == 0) continue;
    const std::int64_t sign = w > 0 ? 1 : -1;
    for (std::uint32_t i = 0; i < v; ++i)
      out.values[i] += sign * (static_cast<std::int64_t>(bank.state(j, i)) - bank.state(j, v + i));
  }
  return out;
}

class ZeroVectorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double x = static_cast<double>(a.values[i]), y = static_cast<double>(b.values[i]);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0) throw ZeroVectorError("cosine_similarity: zero vector for token '" + a.token + "'");
  if (nb == 0) throw ZeroVectorError("cosine_similarity: zero vector for token '" + b.token + "'");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// Token → vector, all rows of one dimension. Iteration is in token order.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  void add(EmbeddingVector row) {
    if (!rows_.empty() && row.values.size() != dimension_)
      throw std::invalid_argument("EmbeddingMatrix: row '" + row.token + "' has dimension " +
                                  std::to_string(row.values.size()) + ", expected " + std::to_string(dimension_));
    dimension_ = row.values.size();
    std::string key = row.token;
    rows_.insert_or_assign(std::move(key), std::move(row));
  }

  bool empty() const noexcept { return rows_.empty(); }
  std::size_t size() const noexcept { return rows_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }
  bool contains(const std::string& tok) const { return rows_.contains(tok); }
  const EmbeddingVector& at(const std::string& tok) const { return rows_.at(tok); }
  const EmbeddingVector* find(const std::string& tok) const {
    auto it = rows_.find(tok);
    return it == rows_.end() ? nullptr : &it->second;
  }

  auto begin() const { return rows_.begin(); }
  auto end() const { return rows_.end(); }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::map<std::string, EmbeddingVector> rows_;
  std::size_t dimension_ = 0;
};

enum class EmbeddingFormat { tsv, w2v_text };

inline EmbeddingFormat parse_embedding_format(const std::string& s) {
  if (s == "tsv") return EmbeddingFormat::tsv;
  if (s == "w2v-text" || s == "w2v") return EmbeddingFormat::w2v_text;
  throw std::invalid_argument("unknown embedding format '" + s + "' (expected tsv or w2v-text)");
}

inline void write_embeddings(std::ostream& out, const EmbeddingMatrix& m, EmbeddingFormat format) {
  if (m.empty()) throw std::invalid_argument("export_embeddings: empty matrix");
  const char sep = format == EmbeddingFormat::tsv ? '\t' : ' ';
  if (format == EmbeddingFormat::tsv) {
    out << "token";
    for (std::size_t i = 0; i < m.dimension(); ++i) out << "\tv" << i;
    out << '\n';
  } else {
    out << m.size() << ' ' << m.dimension() << '\n';
  }
  for (const auto& [tok, row] : m) {
    out << tok;
    for (auto v : row.values) out << sep << v;
    out << '\n';
  }
}

/// Empty matrices are rejected before the file is created.
inline void export_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, EmbeddingFormat format) {
  if (m.empty()) throw std::invalid_argument("export_embeddings: empty matrix");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write embeddings " + path.string());
  write_embeddings(out, m, format);
  if (!out) throw DataError("write failed: " + path.string());
}

/// Reads either export format (detected from the first line). Values may be
/// integers or reals; reals are rounded.
inline EmbeddingMatrix load_embeddings(std::istream& in, const std::string& what = "embeddings") {
  EmbeddingMatrix m;
  std::string line;
  if (!std::getline(in, line)) throw DataError(what + ": empty file");
  const bool tsv = line.rfind("token\t", 0) == 0 || line == "token";
  std::size_t expected_rows = 0;
  if (!tsv) {
    std::istringstream hs(line);
    std::size_t dim = 0;
    if (!(hs >> expected_rows >> dim)) throw DataError(what + ": bad w2v header");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    EmbeddingVector row;
    if (!(ls >> row.token)) throw DataError(what + ":" + std::to_string(lineno) + ": missing token");
    double x;
    while (ls >> x) row.values.push_back(static_cast<std::int64_t>(std::llround(x)));
    if (!ls.eof()) throw DataError(what + ":" + std::to_string(lineno) + ": non-numeric value");
    try {
      m.add(std::move(row));
    } catch (const std::invalid_argument& e) {
      throw DataError(what + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!tsv && m.size() != expected_rows) throw DataError(what + ": header row count does not match");
  return m;
}

inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings " + path.string());
  return load_embeddings(in, path.string());
}

}  // namespace omnitm
