#pragma once

// Per-token autoencoder training.
//
// Omni mode follows the globally synchronized procedure: every clause is
// evaluated, the clipped weighted vote (class_sum) is reduced across all
// clauses, and one shared update probability gates every clause's feedback.
//
// Fast mode replaces the global vote with each clause's own clipped
// contribution r_j = clip(w_j·o_j, −T, T). Clauses never read each other's
// state, so each worker runs its clause range over the whole example sequence
// without synchronization.
//
// All randomness is drawn from counter-based streams keyed by
// (seed, token, epoch, example, clause, kind), so results do not depend on the
// number of workers or on how tokens are scheduled.

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <exception>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "omnitm/clause_bank.hpp"
#include "omnitm/corpus.hpp"
#include "omnitm/rng.hpp"

namespace omnitm {

enum class TrainMode { omni, fast };

inline const char* to_string(TrainMode m) { return m == TrainMode::omni ? "omni" : "fast"; }

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "omni") return TrainMode::omni;
  if (s == "fast") return TrainMode::fast;
  throw std::invalid_argument("unknown training mode '" + s + "' (expected omni or fast)");
}

struct Hyperparams {
  BankConfig bank;
  std::uint32_t accumulation = 1;
  std::uint32_t epochs = 1;
  std::uint32_t examples_per_epoch = 1;
  TrainMode mode = TrainMode::fast;
  std::uint64_t seed = 0;
  std::uint32_t workers = 1;
  // Fast mode only: skip feedback for clauses with negative weight.
  bool negative_weight_gate = true;

  void validate() const {
    bank.validate();
    if (accumulation < 1) throw std::invalid_argument("Hyperparams: accumulation must be >= 1");
    if (epochs < 1) throw std::invalid_argument("Hyperparams: epochs must be >= 1");
    if (examples_per_epoch < 1) throw std::invalid_argument("Hyperparams: examples_per_epoch must be >= 1");
    if (workers < 1) throw std::invalid_argument("Hyperparams: workers must be >= 1");
  }
};

struct FeedbackCounts {
  std::uint64_t type_ia = 0;
  std::uint64_t type_ib = 0;
  std::uint64_t type_ii = 0;
  std::uint64_t no_op = 0;      // selected, Y = 0 and o_j = 0
  std::uint64_t gated = 0;      // selected but blocked by w_j < 0

  FeedbackCounts& operator+=(const FeedbackCounts& o) {
    type_ia += o.type_ia, type_ib += o.type_ib, type_ii += o.type_ii, no_op += o.no_op, gated += o.gated;
    return *this;
  }
  std::uint64_t selected() const { return type_ia + type_ib + type_ii + no_op + gated; }
};

struct TrainReport {
  TrainMode mode = TrainMode::fast;
  std::uint32_t workers = 1;
  double eval_seconds = 0;
  double update_seconds = 0;
  double total_seconds = 0;
  std::vector<double> mean_update_p;  // per epoch
  std::vector<std::int32_t> final_weights;
  FeedbackCounts feedback;
  // Cross-clause vote reductions performed; zero in fast mode.
  std::uint64_t cross_clause_reductions = 0;
};

// ---------------------------------------------------------------------------
// Vote arithmetic
// ---------------------------------------------------------------------------

inline std::int32_t clip_vote(std::int64_t v, std::int32_t t) {
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(v, -std::int64_t{t}, t));
}

/// clip(Σ w_j·o_j, −T, T).
inline std::int32_t class_sum(const FeatureSet& outputs, std::span<const std::int32_t> weights, std::int32_t t) {
  if (outputs.size() != weights.size()) throw std::invalid_argument("class_sum: outputs and weights differ in length");
  std::int64_t sum = 0;
  for (std::size_t j = 0; j < weights.size(); ++j)
    if (outputs.test(j)) sum += weights[j];
  return clip_vote(sum, t);
}

/// r_j = clip(w_j·o_j, −T, T).
inline std::int32_t local_contribution(std::int32_t weight, bool output, std::int32_t t) {
  return output ? clip_vote(weight, t) : 0;
}

/// (T − vote)/(f·T) for Y = 1, (T + vote)/(f·T) for Y = 0, clamped to [0, 1].
inline double update_probability(std::int32_t vote, std::int32_t t, bool label, double factor) {
  const double num = label ? static_cast<double>(t) - vote : static_cast<double>(t) + vote;
  return std::clamp(num / (factor * static_cast<double>(t)), 0.0, 1.0);
}

inline bool sample_update(double p, std::uint32_t draw) { return Threshold::from_probability(p).accepts(draw); }

/// ±1 on a selected firing clause, signed by the label.
inline std::int32_t update_weight(std::int32_t w, bool label, bool output, bool selected) {
  if (!selected || !output) return w;
  if (label) return w == std::numeric_limits<std::int32_t>::max() ? w : w + 1;
  return w == std::numeric_limits<std::int32_t>::min() ? w : w - 1;
}

enum class Feedback { type_ia, type_ib, type_ii, none };

inline Feedback select_feedback(bool label, bool output) {
  if (label) return output ? Feedback::type_ia : Feedback::type_ib;
  return output ? Feedback::type_ii : Feedback::none;
}

namespace detail {

/// Where clause j of a given example draws its random numbers.
struct ExampleKey {
  const KeyedRng* rng;
  std::uint32_t epoch;
  std::uint32_t example;

  std::uint32_t select_draw(std::uint32_t j) const { return rng->stream(DrawKind::select, epoch, example, j).at(0); }
  DrawStream stream(DrawKind kind, std::uint32_t j) const { return rng->stream(kind, epoch, example, j); }
};

inline void apply_feedback(ClauseBank& bank, std::uint32_t j, Feedback kind, const LiteralSet& lits,
                           const ExampleKey& key, FeedbackCounts& counts) {
  switch (kind) {
    case Feedback::type_ia:
      bank.type_ia_feedback(j, lits, key.stream(DrawKind::type_ia, j));
      ++counts.type_ia;
      break;
    case Feedback::type_ib:
      bank.type_ib_feedback(j, key.stream(DrawKind::type_ib, j));
      ++counts.type_ib;
      break;
    case Feedback::type_ii:
      bank.type_ii_feedback(j, lits);
      ++counts.type_ii;
      break;
    case Feedback::none:
      ++counts.no_op;
      break;
  }
}

/// Contiguous clause range owned by worker `w` of `n`.
inline std::pair<std::uint32_t, std::uint32_t> clause_range(std::uint32_t clauses, std::uint32_t w, std::uint32_t n) {
  const std::uint32_t base = clauses / n, extra = clauses % n;
  const std::uint32_t lo = w * base + std::min(w, extra);
  return {lo, lo + base + (w < extra ? 1 : 0)};
}

/// Runs fn(w) for w in [0, n) on n threads (inline when n == 1).
template <typename Fn>
void run_workers(std::uint32_t n, Fn&& fn) {
  if (n == 1) {
    fn(0U);
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(n);
  for (std::uint32_t w = 0; w < n; ++w) threads.emplace_back([&fn, w] { fn(w); });
}

using Clock = std::chrono::steady_clock;

inline double seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

struct PreparedExamples {
  std::vector<LiteralSet> literals;
  std::vector<bool> labels;

  explicit PreparedExamples(const std::vector<Example>& examples) {
    literals.reserve(examples.size());
    labels.reserve(examples.size());
    for (const auto& e : examples) {
      literals.emplace_back(e.input);
      labels.push_back(e.label);
    }
  }
};

inline void check_inputs(const ClauseBank& bank, const std::vector<Example>& examples, const Hyperparams& hp) {
  hp.validate();
  if (!(bank.config() == hp.bank)) throw std::invalid_argument("train: bank config does not match hyperparameters");
  if (examples.empty()) throw std::invalid_argument("train: no examples");
  for (const auto& e : examples)
    if (e.input.size() != hp.bank.features) throw std::invalid_argument("train: example V does not match bank");
}

}  // namespace detail

/// Omni training: all clauses evaluated, vote reduced, then all clauses updated.
/// Epoch e processes examples [(e·n + i) mod size] for i < examples_per_epoch.
inline TrainReport train_token_omni(ClauseBank& bank, const std::vector<Example>& examples, const Hyperparams& hp,
                                    const KeyedRng& rng) {
  detail::check_inputs(bank, examples, hp);
  const auto start = detail::Clock::now();
  const detail::PreparedExamples prepared(examples);
  const auto& cfg = hp.bank;
  const std::uint32_t workers = std::min(hp.workers, cfg.clauses);

  TrainReport report;
  report.mode = TrainMode::omni;
  report.workers = workers;
  report.mean_update_p.assign(hp.epochs, 0.0);

  FeatureSet outputs(cfg.clauses);
  std::vector<std::uint8_t> fired(cfg.clauses, 0);
  std::vector<FeedbackCounts> counts(workers);
  double shared_p = 0;
  std::uint32_t cur_epoch = 0, cur_example = 0;
  detail::Clock::duration eval_time{}, update_time{};
  detail::Clock::time_point phase_start = detail::Clock::now();

  // Barrier completion runs on one thread after every worker has evaluated its
  // clauses: it reduces the vote and publishes the shared update probability.
  auto reduce = [&]() noexcept {
    const std::size_t e = (std::size_t{cur_epoch} * hp.examples_per_epoch + cur_example) % examples.size();
    for (std::uint32_t j = 0; j < cfg.clauses; ++j) outputs.assign(j, fired[j] != 0);
    const std::int32_t vote = class_sum(outputs, bank.weights(), cfg.vote_clip);
    shared_p = update_probability(vote, cfg.vote_clip, prepared.labels[e], cfg.scaling_factor);
    report.mean_update_p[cur_epoch] += shared_p;
    ++report.cross_clause_reductions;
    const auto now = detail::Clock::now();
    eval_time += now - phase_start;
    phase_start = now;
  };
  auto finish_example = [&]() noexcept {
    const auto now = detail::Clock::now();
    update_time += now - phase_start;
    phase_start = now;
    if (++cur_example == hp.examples_per_epoch) cur_example = 0, ++cur_epoch;
  };
  std::barrier evaluated(static_cast<std::ptrdiff_t>(workers), reduce);
  std::barrier updated(static_cast<std::ptrdiff_t>(workers), finish_example);

  detail::run_workers(workers, [&](std::uint32_t w) {
    const auto [lo, hi] = detail::clause_range(cfg.clauses, w, workers);
    for (std::uint32_t epoch = 0; epoch < hp.epochs; ++epoch) {
      for (std::uint32_t i = 0; i < hp.examples_per_epoch; ++i) {
        const std::size_t e = (std::size_t{epoch} * hp.examples_per_epoch + i) % examples.size();
        const auto& lits = prepared.literals[e];
        const bool label = prepared.labels[e];
        for (std::uint32_t j = lo; j < hi; ++j) fired[j] = bank.evaluate_clause(j, lits) ? 1 : 0;
        evaluated.arrive_and_wait();

        const detail::ExampleKey key{&rng, epoch, i};
        for (std::uint32_t j = lo; j < hi; ++j) {
          if (!sample_update(shared_p, key.select_draw(j))) continue;
          const bool o = fired[j] != 0;
          detail::apply_feedback(bank, j, select_feedback(label, o), lits, key, counts[w]);
          bank.set_weight(j, update_weight(bank.weight(j), label, o, true));
        }
        updated.arrive_and_wait();
      }
    }
  });

  for (auto& p : report.mean_update_p) p /= hp.examples_per_epoch;
  for (const auto& c : counts) report.feedback += c;
  report.eval_seconds = detail::seconds(eval_time);
  report.update_seconds = detail::seconds(update_time);
  report.total_seconds = detail::seconds(detail::Clock::now() - start);
  report.final_weights = bank.weights();
  return report;
}

/// Fast training: each clause decides its own update from r_j alone.
inline TrainReport train_token_fast(ClauseBank& bank, const std::vector<Example>& examples, const Hyperparams& hp,
                                    const KeyedRng& rng) {
  detail::check_inputs(bank, examples, hp);
  const auto start = detail::Clock::now();
  const detail::PreparedExamples prepared(examples);
  const auto& cfg = hp.bank;
  const std::uint32_t workers = std::min(hp.workers, cfg.clauses);

  TrainReport report;
  report.mode = TrainMode::fast;
  report.workers = workers;

  struct WorkerStats {
    FeedbackCounts counts;
    std::vector<double> p_sum;
    detail::Clock::duration eval{}, update{};
  };
  std::vector<WorkerStats> stats(workers);

  detail::run_workers(workers, [&](std::uint32_t w) {
    auto& st = stats[w];
    st.p_sum.assign(hp.epochs, 0.0);
    const auto [lo, hi] = detail::clause_range(cfg.clauses, w, workers);
    std::vector<std::uint8_t> fired(hi - lo);
    for (std::uint32_t epoch = 0; epoch < hp.epochs; ++epoch) {
      for (std::uint32_t i = 0; i < hp.examples_per_epoch; ++i) {
        const std::size_t e = (std::size_t{epoch} * hp.examples_per_epoch + i) % examples.size();
        const auto& lits = prepared.literals[e];
        const bool label = prepared.labels[e];
        const auto t0 = detail::Clock::now();
        for (std::uint32_t j = lo; j < hi; ++j) fired[j - lo] = bank.evaluate_clause(j, lits) ? 1 : 0;
        const auto t1 = detail::Clock::now();

        const detail::ExampleKey key{&rng, epoch, i};
        for (std::uint32_t j = lo; j < hi; ++j) {
          const bool o = fired[j - lo] != 0;
          const std::int32_t wj = bank.weight(j);
          const double p = update_probability(local_contribution(wj, o, cfg.vote_clip), cfg.vote_clip, label,
                                              cfg.scaling_factor);
          st.p_sum[epoch] += p;
          if (!sample_update(p, key.select_draw(j))) continue;
          if (hp.negative_weight_gate && wj < 0) {
            ++st.counts.gated;
            continue;
          }
          detail::apply_feedback(bank, j, select_feedback(label, o), lits, key, st.counts);
          bank.set_weight(j, update_weight(wj, label, o, true));
        }
        const auto t2 = detail::Clock::now();
        st.eval += t1 - t0;
        st.update += t2 - t1;
      }
    }
  });

  report.mean_update_p.assign(hp.epochs, 0.0);
  detail::Clock::duration eval{}, update{};
  for (const auto& st : stats) {
    report.feedback += st.counts;
    for (std::uint32_t e = 0; e < hp.epochs; ++e) report.mean_update_p[e] += st.p_sum[e];
    eval += st.eval;
    update += st.update;
  }
  for (auto& p : report.mean_update_p) p /= static_cast<double>(hp.examples_per_epoch) * cfg.clauses;
  // Stage times are per-worker means so that eval + update never exceeds wall time.
  report.eval_seconds = detail::seconds(eval) / workers;
  report.update_seconds = detail::seconds(update) / workers;
  report.total_seconds = detail::seconds(detail::Clock::now() - start);
  report.final_weights = bank.weights();
  return report;
}

inline TrainReport train_token(ClauseBank& bank, const std::vector<Example>& examples, const Hyperparams& hp,
                               const KeyedRng& rng) {
  return hp.mode == TrainMode::omni ? train_token_omni(bank, examples, hp, rng)
                                    : train_token_fast(bank, examples, hp, rng);
}

/// Generator for one token: everything (initialization and training) derives from it.
inline KeyedRng token_rng(std::uint64_t seed, std::uint32_t token_index) { return KeyedRng(seed).child(token_index); }

/// Fresh bank for `token_index`, trained on `examples`.
inline std::pair<ClauseBank, TrainReport> train_new_token(const std::vector<Example>& examples, const Hyperparams& hp,
                                                          std::uint32_t token_index) {
  const KeyedRng rng = token_rng(hp.seed, token_index);
  ClauseBank bank(hp.bank, rng);
  auto report = train_token(bank, examples, hp, rng);
  return {std::move(bank), std::move(report)};
}

struct TokenJob {
  std::string token;
  std::uint32_t token_index = 0;
  std::filesystem::path example_file;
};

struct TokenResult {
  ClauseBank bank;
  TrainReport report;
};

/// Trains every token independently. Up to `token_concurrency` tokens run at
/// once; results do not depend on that number or on job order.
inline std::map<std::string, TokenResult> train_vocabulary(const std::vector<TokenJob>& jobs, const Hyperparams& hp,
                                                           std::uint32_t token_concurrency = 1) {
  hp.validate();
  for (const auto& j : jobs)
    if (!std::filesystem::exists(j.example_file))
      throw DataError("missing example file for token '" + j.token + "': " + j.example_file.string());

  std::vector<std::optional<TokenResult>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  const std::uint32_t n = std::max<std::uint32_t>(1, std::min<std::size_t>(token_concurrency, jobs.size()));
  detail::run_workers(n, [&](std::uint32_t) {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      try {
        auto file = read_example_file(jobs[i].example_file, hp.bank.features);
        auto [bank, report] = train_new_token(file.examples, hp, jobs[i].token_index);
        results[i].emplace(TokenResult{std::move(bank), std::move(report)});
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::map<std::string, TokenResult> out;
  for (std::size_t i = 0; i < jobs.size(); ++i) out.emplace(jobs[i].token, std::move(*results[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Report log: one JSON object per line.
// ---------------------------------------------------------------------------

inline void write_train_report(std::ostream& out, const std::string& token, const TrainReport& r) {
  for (std::size_t e = 0; e < r.mean_update_p.size(); ++e) {
    nlohmann::json line{{"kind", "epoch"}, {"token", token}, {"epoch", e}, {"mean_update_p", r.mean_update_p[e]}};
    out << line.dump() << '\n';
  }
  nlohmann::json summary{{"kind", "summary"},
                         {"token", token},
                         {"mode", to_string(r.mode)},
                         {"workers", r.workers},
                         {"eval_s", r.eval_seconds},
                         {"update_s", r.update_seconds},
                         {"total_s", r.total_seconds},
                         {"type_ia", r.feedback.type_ia},
                         {"type_ib", r.feedback.type_ib},
                         {"type_ii", r.feedback.type_ii},
                         {"no_op", r.feedback.no_op},
                         {"gated", r.feedback.gated},
                         {"cross_clause_reductions", r.cross_clause_reductions},
                         {"final_weights", r.final_weights}};
  out << summary.dump() << '\n';
}

}  // namespace omnitm
