#pragma once

// Embedding and model evaluation: rank correlations, word-similarity
// datasets, document classification metrics, cluster export and the
// two-stage training timing harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnitm/clause_bank.hpp"
#include "omnitm/corpus.hpp"
#include "omnitm/embedding.hpp"
#include "omnitm/trainer.hpp"

namespace omnitm {

class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Rank correlations
// ---------------------------------------------------------------------------

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t k = i;
    while (k + 1 < order.size() && xs[order[k + 1]] == xs[order[i]]) ++k;
    const double r = (static_cast<double>(i) + static_cast<double>(k)) / 2.0 + 1.0;
    for (std::size_t m = i; m <= k; ++m) ranks[order[m]] = r;
    i = k + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw DegenerateInputError("pearson: constant input");
  return sxy / std::sqrt(sxx * syy);
}

namespace detail {
inline void check_pairs(std::span<const double> xs, std::span<const double> ys, const char* what) {
  if (xs.size() != ys.size()) throw std::invalid_argument(std::string(what) + ": length mismatch");
  if (xs.size() < 2) throw DegenerateInputError(std::string(what) + ": need at least 2 observations");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(xs) || constant(ys)) throw DegenerateInputError(std::string(what) + ": all values tied");
}
}  // namespace detail

/// Spearman's rho: Pearson correlation of average ranks.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  detail::check_pairs(xs, ys, "spearman");
  const auto rx = average_ranks(xs), ry = average_ranks(ys);
  return pearson(rx, ry);
}

namespace detail {
// Merge sort that counts inversions (pairs out of order).
inline std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(v, tmp, lo, mid) + count_inversions(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += mid - i;
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

// Σ t(t−1)/2 over runs of equal adjacent values in a sorted sequence.
template <typename Eq>
std::uint64_t tied_pairs(std::size_t n, Eq same) {
  std::uint64_t total = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (same(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}
}  // namespace detail

/// Kendall's tau-b, O(n log n) (Knight's algorithm).
inline double kendall_tau_b(std::span<const double> xs, std::span<const double> ys) {
  detail::check_pairs(xs, ys, "kendall_tau_b");
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] != xs[b] ? xs[a] < xs[b] : ys[a] < ys[b];
  });
  const auto tx = detail::tied_pairs(n, [&](std::size_t a, std::size_t b) { return xs[order[a]] == xs[order[b]]; });
  const auto txy = detail::tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return xs[order[a]] == xs[order[b]] && ys[order[a]] == ys[order[b]];
  });
  std::vector<double> y(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = ys[order[i]];
  const std::uint64_t swaps = detail::count_inversions(y, tmp, 0, n);
  const auto ty = detail::tied_pairs(n, [&](std::size_t a, std::size_t b) { return y[a] == y[b]; });

  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  // concordant − discordant = n0 − tx − ty + txy − 2·swaps
  const std::int64_t s = n0 - static_cast<std::int64_t>(tx) - static_cast<std::int64_t>(ty) +
                         static_cast<std::int64_t>(txy) - 2 * static_cast<std::int64_t>(swaps);
  const double denom = std::sqrt(static_cast<double>(n0 - static_cast<std::int64_t>(tx)) *
                                 static_cast<double>(n0 - static_cast<std::int64_t>(ty)));
  return static_cast<double>(s) / denom;
}

// ---------------------------------------------------------------------------
// Similarity datasets
// ---------------------------------------------------------------------------

struct WordPair {
  std::string first;
  std::string second;
  double score = 0;
};

struct SimilarityDataset {
  std::string name;
  std::vector<WordPair> pairs;

  /// Distinct words, sorted.
  std::vector<std::string> tokens() const {
    std::set<std::string> s;
    for (const auto& p : pairs) s.insert(p.first), s.insert(p.second);
    return {s.begin(), s.end()};
  }
};

namespace detail {
inline std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  if (sep == ' ') {
    std::istringstream ss(line);
    for (std::string f; ss >> f;) out.push_back(f);
    return out;
  }
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t\r");
    const auto e = cur.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  return out;
}

inline std::optional<double> parse_score(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}
}  // namespace detail

/// Lines "word1 <sep> word2 <sep> score"; the separator (tab, comma,
/// semicolon or whitespace) is detected from the first data line. '#' lines
/// and blank lines are skipped, as is a first line whose score column is not
/// numeric (a column header).
inline SimilarityDataset parse_similarity_dataset(std::istream& in, const std::string& name) {
  SimilarityDataset ds{name, {}};
  std::optional<char> sep;
  bool first_data = true;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    if (!sep) {
      sep = line.find('\t') != std::string::npos   ? '\t'
            : line.find(',') != std::string::npos  ? ','
            : line.find(';') != std::string::npos  ? ';'
                                                   : ' ';
    }
    const auto fields = detail::split_fields(line, *sep);
    const bool header_candidate = first_data;
    first_data = false;
    auto fail = [&](const std::string& why) {
      throw DataError(name + ":" + std::to_string(lineno) + ": " + why);
    };
    if (fields.size() != 3) {
      if (header_candidate) continue;
      fail("expected 3 fields, found " + std::to_string(fields.size()));
    }
    const auto score = detail::parse_score(fields[2]);
    if (!score) {
      if (header_candidate) continue;
      fail("score '" + fields[2] + "' is not a finite number");
    }
    if (fields[0].empty() || fields[1].empty()) fail("empty word");
    ds.pairs.push_back({detail::lower(fields[0]), detail::lower(fields[1]), *score});
  }
  if (ds.pairs.empty()) throw DataError(name + ": empty similarity dataset");
  return ds;
}

inline SimilarityDataset load_similarity_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open similarity dataset " + path.string());
  return parse_similarity_dataset(in, path.stem().string());
}

struct SimilarityResult {
  double rho = 0;
  double tau = 0;
  std::size_t covered_pairs = 0;
  std::size_t skipped_pairs = 0;
};

/// Cosine similarity per covered pair, correlated against the human scores.
/// Pairs with a word missing from the embeddings are skipped and counted.
inline SimilarityResult eval_similarity(const EmbeddingMatrix& embeddings, const SimilarityDataset& ds) {
  if (ds.pairs.empty()) throw std::invalid_argument("eval_similarity: empty dataset");
  std::vector<double> model, human;
  SimilarityResult r;
  for (const auto& p : ds.pairs) {
    const auto* a = embeddings.find(p.first);
    const auto* b = embeddings.find(p.second);
    if (!a || !b) {
      ++r.skipped_pairs;
      continue;
    }
    model.push_back(cosine_similarity(*a, *b));
    human.push_back(p.score);
  }
  r.covered_pairs = model.size();
  if (r.covered_pairs < 2)
    throw DataError("eval_similarity: " + std::to_string(r.covered_pairs) + " covered pairs in " + ds.name +
                    " (need at least 2)");
  r.rho = spearman(model, human);
  r.tau = kendall_tau_b(model, human);
  return r;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// 1 iff the clipped vote is strictly positive; empty clauses do not vote.
inline bool classify_document(const ClauseBank& bank, const FeatureSet& x) {
  if (x.size() != bank.features()) throw std::invalid_argument("classify_documents: example V does not match bank");
  const auto outputs = bank.evaluate_all(x, EvalMode::inference);
  return class_sum(outputs, bank.weights(), bank.config().vote_clip) > 0;
}

inline std::vector<bool> classify_documents(const ClauseBank& bank, const std::vector<Example>& examples) {
  std::vector<bool> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(classify_document(bank, e.input));
  return out;
}

struct ClassificationMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline ClassificationMetrics precision_recall_f1(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw std::invalid_argument("precision_recall_f1: need equal, nonzero lengths");
  ClassificationMetrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i]) {
      labels[i] ? ++m.tp : ++m.fp;
    } else {
      labels[i] ? ++m.fn : ++m.tn;
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

inline std::vector<bool> labels_of(const std::vector<Example>& examples) {
  std::vector<bool> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

// ---------------------------------------------------------------------------
// Cluster export
// ---------------------------------------------------------------------------

using TokenGroups = std::map<std::string, std::vector<std::string>>;

/// Lines "group token token ...", '#' comments.
inline TokenGroups load_token_groups(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open groups file " + path.string());
  TokenGroups groups;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    auto fields = tokenize(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    if (fields.size() < 2) throw DataError(path.string() + ":" + std::to_string(lineno) + ": group has no tokens");
    auto& g = groups[fields.front()];
    g.insert(g.end(), fields.begin() + 1, fields.end());
  }
  if (groups.empty()) throw DataError(path.string() + ": no groups");
  return groups;
}

struct ClusterReport {
  std::vector<std::string> missing_tokens;
  std::optional<double> intra_mean;  // absent when no group has two embedded tokens
  std::optional<double> inter_mean;  // absent when fewer than two groups are populated
  std::size_t exported_rows = 0;

  /// Mean intra-group cosine minus mean inter-group cosine, with an absent
  /// term read as 0.
  double separation() const { return intra_mean.value_or(0.0) - inter_mean.value_or(0.0); }
};

/// Computes the group-separation score; optionally writes the tsv
/// (token, group, v0..v{V−1}).
inline ClusterReport cluster_vectors(const EmbeddingMatrix& embeddings, const TokenGroups& groups,
                                     std::ostream* tsv = nullptr) {
  ClusterReport rep;
  std::vector<std::pair<std::string, const EmbeddingVector*>> rows;  // (group, vector)
  for (const auto& [g, toks] : groups)
    for (const auto& t : toks) {
      if (const auto* e = embeddings.find(t)) {
        rows.emplace_back(g, e);
      } else {
        rep.missing_tokens.push_back(t);
      }
    }
  if (tsv) {
    *tsv << "token\tgroup";
    for (std::size_t i = 0; i < embeddings.dimension(); ++i) *tsv << "\tv" << i;
    *tsv << '\n';
    for (const auto& [g, e] : rows) {
      *tsv << e->token << '\t' << g;
      for (auto v : e->values) *tsv << '\t' << v;
      *tsv << '\n';
    }
  }
  rep.exported_rows = rows.size();

  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      const double c = cosine_similarity(*rows[a].second, *rows[b].second);
      if (rows[a].first == rows[b].first) {
        intra += c, ++n_intra;
      } else {
        inter += c, ++n_inter;
      }
    }
  if (n_intra) rep.intra_mean = intra / static_cast<double>(n_intra);
  if (n_inter) rep.inter_mean = inter / static_cast<double>(n_inter);
  return rep;
}

inline ClusterReport export_cluster_vectors(const EmbeddingMatrix& embeddings, const TokenGroups& groups,
                                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write cluster export " + path.string());
  auto rep = cluster_vectors(embeddings, groups, &out);
  if (!out) throw DataError("write failed: " + path.string());
  return rep;
}

// ---------------------------------------------------------------------------
// Training benchmark
// ---------------------------------------------------------------------------

struct StageTimes {
  double eval_seconds = 0;
  double update_seconds = 0;
  double total_seconds = 0;
};

struct MeanStd {
  double mean = 0;
  double stddev = 0;  // sample standard deviation; 0 for a single run
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_std: no samples");
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() == 1) return {m, 0.0};
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

struct BenchTimings {
  TrainMode mode = TrainMode::fast;
  std::uint32_t workers = 1;
  std::vector<StageTimes> runs;
  MeanStd eval, update, total;
  std::optional<SimilarityResult> similarity;
  // Banks from the last run, keyed by token.
  std::map<std::string, ClauseBank> banks;
};

struct BenchmarkReport {
  std::string platform_label;
  std::vector<BenchTimings> modes;

  /// Omni mean total time over fast mean total time, when both were run.
  std::optional<double> omni_over_fast() const {
    const BenchTimings *f = nullptr, *o = nullptr;
    for (const auto& m : modes) (m.mode == TrainMode::fast ? f : o) = &m;
    if (!f || !o || f->total.mean <= 0) return std::nullopt;
    return o->total.mean / f->total.mean;
  }
};

struct BenchmarkOptions {
  std::uint32_t runs = 5;
  std::vector<TrainMode> modes{TrainMode::fast, TrainMode::omni};
  std::string platform_label = "cpu";
  std::optional<SimilarityDataset> dataset;
};

/// Times training over a token workload. Example files are loaded before any
/// clock starts; only the evaluate and update stages are measured, summed
/// over tokens.
inline BenchmarkReport benchmark_training(const Hyperparams& base, const std::vector<TokenJob>& jobs,
                                          const BenchmarkOptions& opt) {
  if (opt.runs < 1) throw std::invalid_argument("benchmark_training: runs must be >= 1");
  if (jobs.empty()) throw std::invalid_argument("benchmark_training: no tokens");
  base.validate();
  std::vector<std::vector<Example>> examples;
  examples.reserve(jobs.size());
  for (const auto& j : jobs) {
    if (!std::filesystem::exists(j.example_file))
      throw DataError("missing example file for token '" + j.token + "': " + j.example_file.string());
    examples.push_back(read_example_file(j.example_file, base.bank.features).examples);
  }

  BenchmarkReport report{opt.platform_label, {}};
  for (TrainMode mode : opt.modes) {
    Hyperparams hp = base;
    hp.mode = mode;
    BenchTimings bt;
    bt.mode = mode;
    bt.workers = hp.workers;
    for (std::uint32_t run = 0; run < opt.runs; ++run) {
      StageTimes st;
      std::map<std::string, ClauseBank> banks;
      for (std::size_t t = 0; t < jobs.size(); ++t) {
        auto [bank, rep] = train_new_token(examples[t], hp, jobs[t].token_index);
        st.eval_seconds += rep.eval_seconds;
        st.update_seconds += rep.update_seconds;
        st.total_seconds += rep.total_seconds;
        if (run + 1 == opt.runs) banks.emplace(jobs[t].token, std::move(bank));
      }
      bt.runs.push_back(st);
      if (run + 1 == opt.runs) bt.banks = std::move(banks);
    }
    auto column = [&](double StageTimes::*f) {
      std::vector<double> v;
      for (const auto& r : bt.runs) v.push_back(r.*f);
      return mean_std(v);
    };
    bt.eval = column(&StageTimes::eval_seconds);
    bt.update = column(&StageTimes::update_seconds);
    bt.total = column(&StageTimes::total_seconds);
    if (opt.dataset) {
      EmbeddingMatrix m;
      for (const auto& [tok, bank] : bt.banks) m.add(extract_embedding(bank, tok));
      bt.similarity = eval_similarity(m, *opt.dataset);
    }
    report.modes.push_back(std::move(bt));
  }
  return report;
}

/// One JSON object per mode, plus a comparison line when both modes ran.
inline void write_benchmark_report(std::ostream& out, const BenchmarkReport& r) {
  for (const auto& m : r.modes) {
    nlohmann::json line{{"kind", "bench"},
                        {"platform", r.platform_label},
                        {"mode", to_string(m.mode)},
                        {"workers", m.workers},
                        {"runs", m.runs.size()},
                        {"eval_s", m.eval.mean},
                        {"eval_s_std", m.eval.stddev},
                        {"update_s", m.update.mean},
                        {"update_s_std", m.update.stddev},
                        {"total_s", m.total.mean},
                        {"total_s_std", m.total.stddev}};
    if (m.similarity) {
      line["rho"] = m.similarity->rho;
      line["tau"] = m.similarity->tau;
      line["covered_pairs"] = m.similarity->covered_pairs;
      line["skipped_pairs"] = m.similarity->skipped_pairs;
    } else {
      line["rho"] = nullptr;
      line["tau"] = nullptr;
    }
    out << line.dump() << '\n';
  }
  if (auto ratio = r.omni_over_fast()) {
    out << nlohmann::json{{"kind", "comparison"}, {"platform", r.platform_label}, {"omni_over_fast_total", *ratio}}.dump()
        << '\n';
  }
}

}  // namespace omnitm
