#pragma once

// Command-line front end. `run` takes the arguments after the program name so
// tests can drive it directly.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "omnitm/omnitm.hpp"

namespace omnitm::cli {

namespace fs = std::filesystem;

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_data = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// key=value lines, '#' starts a comment.
inline std::map<std::string, std::string> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string{};
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    if (key.starts_with("--")) key.erase(0, 2);
    if (key.empty()) throw UsageError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

/// Writes to a file, or to `stdout_stream` when the path is "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& stdout_stream) {
    if (path == "-") {
      stream_ = &stdout_stream;
    } else {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw DataError("cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

/// A token list is either a file (whitespace separated) or a comma list.
inline std::vector<std::string> parse_token_list(const std::string& spec) {
  std::vector<std::string> out;
  if (fs::is_regular_file(spec)) {
    std::ifstream in(spec);
    std::string line;
    while (std::getline(in, line))
      for (auto& t : tokenize(line))
        if (!t.starts_with('#')) out.push_back(std::move(t));
  } else {
    std::stringstream ss(spec);
    std::string t;
    while (std::getline(ss, t, ','))
      for (auto& w : tokenize(t)) out.push_back(std::move(w));
  }
  if (out.empty()) throw DataError("token list '" + spec + "' is empty");
  return out;
}

inline ExampleHeader peek_example_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing example file " + path.string());
  io::Bytes head(example_header_bytes);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  io::Reader r(head, path.string());
  r.expect_magic("TMEX");
  ExampleHeader h;
  h.version = r.get<std::uint16_t>();
  h.feature_count = r.get<std::uint32_t>();
  h.example_count = r.get<std::uint32_t>();
  h.accumulation = r.get<std::uint16_t>();
  h.target_index = r.get<std::uint32_t>();
  return h;
}

inline fs::path example_path(const fs::path& dir, const std::string& token) { return dir / (token + ".tmex"); }
inline fs::path bank_path(const fs::path& dir, const std::string& token) { return dir / (token + ".tmbk"); }

/// Jobs for every token, with the token index and V taken from the file headers.
inline std::vector<TokenJob> collect_jobs(const fs::path& dir, const std::vector<std::string>& tokens,
                                          std::uint32_t& features) {
  std::vector<TokenJob> jobs;
  features = 0;
  for (const auto& t : tokens) {
    const auto path = example_path(dir, t);
    const auto h = peek_example_header(path);
    if (features != 0 && h.feature_count != features)
      throw DataError(path.string() + ": V " + std::to_string(h.feature_count) + " differs from " +
                      std::to_string(features));
    features = h.feature_count;
    jobs.push_back({t, h.target_index, path});
  }
  return jobs;
}

/// Option values shared by the training subcommands.
struct TrainArgs {
  std::uint32_t clauses = 32;
  std::int32_t vote_clip = 20000;
  double specificity = 1.0;
  std::uint32_t state_bits = 8;
  std::optional<std::uint32_t> threshold;
  double scaling_factor = 2.0;
  std::uint32_t epochs = 4;
  std::uint32_t examples_per_epoch = 2000;
  std::string mode = "fast";
  std::uint32_t workers = 1;
  std::uint64_t seed = 0;
  bool no_gate = false;

  void add_to(CLI::App* app) {
    app->add_option("--clauses", clauses, "Clauses per token bank")->capture_default_str();
    app->add_option("-T,--vote-clip", vote_clip, "Vote clip bound T")->capture_default_str();
    app->add_option("-s,--specificity", specificity, "Specificity s")->capture_default_str();
    app->add_option("--state-bits", state_bits, "State bits per automaton")->capture_default_str();
    app->add_option("--threshold", threshold, "Inclusion threshold N (default 2^(b-1)-1)");
    app->add_option("--scaling-factor", scaling_factor, "Update probability scaling factor")->capture_default_str();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--examples-per-epoch", examples_per_epoch)->capture_default_str();
    app->add_option("--mode", mode, "fast or omni")->check(CLI::IsMember({"fast", "omni"}))->capture_default_str();
    app->add_option("--workers", workers, "Worker threads per token")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->required();
    app->add_flag("--no-negative-weight-gate", no_gate, "Fast mode: let negative-weight clauses learn");
  }

  Hyperparams hyperparams(std::uint32_t features) const {
    Hyperparams hp;
    hp.bank.clauses = clauses;
    hp.bank.features = features;
    hp.bank.state_bits = state_bits;
    hp.bank.threshold = threshold.value_or(state_bits >= 1 && state_bits <= 16 ? BankConfig::default_threshold(state_bits) : 0);
    hp.bank.vote_clip = vote_clip;
    hp.bank.specificity = specificity;
    hp.bank.scaling_factor = scaling_factor;
    hp.epochs = epochs;
    hp.examples_per_epoch = examples_per_epoch;
    hp.mode = parse_train_mode(mode);
    hp.workers = workers;
    hp.seed = seed;
    hp.negative_weight_gate = !no_gate;
    try {
      hp.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return hp;
  }
};

inline const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"build-vocab",   "prepare-examples", "train",           "embed",
                                              "eval-similarity", "eval-classify",   "export-clusters", "bench"};
  return names;
}

/// Inserts config values as flags right after the subcommand name, so flags
/// given on the command line (which come later) take precedence.
inline std::vector<std::string> apply_config(const std::vector<std::string>& args, CLI::App& app) {
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].starts_with("--config=")) config = args[i].substr(9);
  }
  if (!config) return args;

  std::size_t sub_pos = args.size();
  CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < args.size(); ++i)
    if (auto* s = app.get_subcommand_no_throw(args[i])) {
      sub_pos = i, sub = s;
      break;
    }
  if (!sub) return args;

  std::vector<std::string> injected;
  for (const auto& [key, value] : read_config(*config)) {
    if (key == "config") continue;
    const std::string flag = "--" + key;
    if (sub->get_option_no_throw(flag)) {
      injected.push_back(flag + "=" + value);
      continue;
    }
    bool known = false;
    for (const auto& name : subcommand_names())
      if (app.get_subcommand(name)->get_option_no_throw(flag)) known = true;
    if (!known) throw UsageError(*config + ": unknown key '" + key + "'");
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1));
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1), args.end());
  return out;
}

inline nlohmann::json similarity_json(const SimilarityDataset& ds, const SimilarityResult& r) {
  return {{"kind", "similarity"},  {"dataset", ds.name},          {"pairs", ds.pairs.size()},
          {"distinct_tokens", ds.tokens().size()}, {"covered_pairs", r.covered_pairs},
          {"skipped_pairs", r.skipped_pairs},      {"rho", r.rho},                    {"tau", r.tau}};
}

inline int run(const std::vector<std::string>& raw_args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Tsetlin machine autoencoder word embeddings", "omnitm"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.footer("Every subcommand accepts --config FILE with key=value lines; command-line flags override it.\n"
             "Exit codes: 0 success, 1 usage error, 2 data error.");
  std::string config_path;

  auto add_config = [&](CLI::App* s) { s->add_option("--config", config_path, "key=value config file"); };

  // build-vocab
  std::string corpus, out_path = "-", vocab_path;
  std::size_t min_count = 1, max_vocab = 40000;
  auto* build = app.add_subcommand("build-vocab", "Corpus -> vocabulary file");
  add_config(build);
  build->add_option("--corpus", corpus, "One document per line")->required();
  build->add_option("--min-count", min_count)->capture_default_str();
  build->add_option("--max-vocab", max_vocab)->capture_default_str();
  build->add_option("--out", out_path, "Vocabulary file or - for stdout")->capture_default_str();

  // prepare-examples
  std::string tokens_spec, examples_dir;
  std::size_t count = 8000;
  std::uint32_t accumulation = 24;
  std::uint64_t prep_seed = 0;
  auto* prep = app.add_subcommand("prepare-examples", "Corpus + vocabulary + tokens -> per-token example files");
  add_config(prep);
  prep->add_option("--corpus", corpus)->required();
  prep->add_option("--vocab", vocab_path)->required();
  prep->add_option("--tokens", tokens_spec, "Token file or comma list")->required();
  prep->add_option("--examples-dir", examples_dir)->required();
  prep->add_option("--count", count, "Examples per token")->capture_default_str();
  prep->add_option("--accumulation", accumulation, "Documents OR-ed per example")->capture_default_str();
  prep->add_option("--seed", prep_seed)->required();

  // train
  TrainArgs train_args;
  std::string banks_dir;
  std::uint32_t token_concurrency = 1;
  auto* train = app.add_subcommand("train", "Example files -> bank snapshots and training reports");
  add_config(train);
  train->add_option("--tokens", tokens_spec)->required();
  train->add_option("--examples-dir", examples_dir)->required();
  train->add_option("--banks-dir", banks_dir)->required();
  train->add_option("--token-concurrency", token_concurrency, "Tokens trained at once")->capture_default_str();
  train->add_option("--out", out_path, "Training report (JSON lines) or -")->capture_default_str();
  train_args.add_to(train);

  // embed
  std::string format = "tsv";
  auto* embed = app.add_subcommand("embed", "Bank snapshots -> embedding file");
  add_config(embed);
  embed->add_option("--banks-dir", banks_dir)->required();
  embed->add_option("--tokens", tokens_spec, "Token file or comma list (default: every bank in the directory)");
  embed->add_option("--format", format, "tsv or w2v-text")->check(CLI::IsMember({"tsv", "w2v-text"}))->capture_default_str();
  embed->add_option("--out", out_path)->capture_default_str();

  // eval-similarity
  std::string embeddings_path, dataset_path;
  auto* evsim = app.add_subcommand("eval-similarity", "Embeddings + word-pair dataset -> rho/tau report");
  add_config(evsim);
  evsim->add_option("--embeddings", embeddings_path)->required();
  evsim->add_option("--dataset", dataset_path)->required();
  evsim->add_option("--out", out_path)->capture_default_str();

  // eval-classify
  std::string bank_file, examples_file;
  std::int32_t classify_clip = 20000;
  auto* evcls = app.add_subcommand("eval-classify", "Bank + held-out example file -> precision/recall/F1");
  add_config(evcls);
  evcls->add_option("--bank", bank_file)->required();
  evcls->add_option("--examples", examples_file)->required();
  evcls->add_option("-T,--vote-clip", classify_clip, "Vote clip bound T used in training")->capture_default_str();
  evcls->add_option("--out", out_path)->capture_default_str();

  // export-clusters
  std::string groups_path, tsv_path;
  auto* clusters = app.add_subcommand("export-clusters", "Embeddings + groups -> tsv and separation score");
  add_config(clusters);
  clusters->add_option("--embeddings", embeddings_path)->required();
  clusters->add_option("--groups", groups_path, "Lines: group token token ...")->required();
  clusters->add_option("--tsv", tsv_path, "Vector export for external projection")->required();
  clusters->add_option("--out", out_path, "Separation report or -")->capture_default_str();

  // bench
  TrainArgs bench_args;
  std::uint32_t runs = 5;
  std::string modes = "fast,omni", platform = "cpu";
  auto* bench = app.add_subcommand("bench", "Two-stage training timing over a token workload");
  add_config(bench);
  bench->add_option("--tokens", tokens_spec)->required();
  bench->add_option("--examples-dir", examples_dir)->required();
  bench->add_option("--runs", runs)->capture_default_str();
  bench->add_option("--modes", modes, "Comma list of fast, omni")->capture_default_str();
  bench->add_option("--platform-label", platform)->capture_default_str();
  bench->add_option("--dataset", dataset_path, "Word-pair dataset scored after the last run");
  bench->add_option("--out", out_path)->capture_default_str();
  bench_args.add_to(bench);
  bench->remove_option(bench->get_option("--mode"));

  std::vector<std::string> args;
  try {
    args = apply_config(raw_args, app);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return exit_usage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  }

  try {
    if (*build) {
      const auto docs = read_corpus(fs::path(corpus));
      const auto vocab = build_vocabulary(docs, min_count, max_vocab);
      Output o(out_path, out);
      for (const auto& t : vocab.tokens()) *o << t << '\n';
    } else if (*prep) {
      const auto vocab = Vocabulary::load(vocab_path);
      const auto tokens = parse_token_list(tokens_spec);
      if (accumulation < 1 || accumulation > 0xffff) throw UsageError("--accumulation must be in [1, 65535]");
      const auto docs = binarize_corpus(read_corpus(fs::path(corpus)), vocab);
      fs::create_directories(examples_dir);
      for (const auto& t : tokens) {
        const std::uint32_t idx = vocab.index(t);
        auto rng = example_rng(prep_seed, idx);
        std::vector<Example> ex;
        try {
          ex = prepare_examples(docs, idx, count, accumulation, rng);
        } catch (const PoolEmptyError& e) {
          throw DataError("token '" + t + "': " + e.what());
        }
        ExampleHeader h;
        h.feature_count = static_cast<std::uint32_t>(vocab.size());
        h.example_count = static_cast<std::uint32_t>(ex.size());
        h.accumulation = static_cast<std::uint16_t>(accumulation);
        h.target_index = idx;
        write_example_file(example_path(examples_dir, t), h, ex);
      }
    } else if (*train) {
      const auto tokens = parse_token_list(tokens_spec);
      std::uint32_t v = 0;
      const auto jobs = collect_jobs(examples_dir, tokens, v);
      const auto hp = train_args.hyperparams(v);
      const auto results = train_vocabulary(jobs, hp, token_concurrency);
      fs::create_directories(banks_dir);
      Output o(out_path, out);
      for (const auto& t : tokens) {
        const auto& r = results.at(t);
        write_bank_file(bank_path(banks_dir, t), r.bank);
        write_train_report(*o, t, r.report);
      }
    } else if (*embed) {
      std::vector<std::string> tokens;
      if (!tokens_spec.empty()) {
        tokens = parse_token_list(tokens_spec);
      } else {
        if (!fs::is_directory(banks_dir)) throw DataError("banks directory " + banks_dir + " does not exist");
        std::set<std::string> found;
        for (const auto& entry : fs::directory_iterator(banks_dir))
          if (entry.path().extension() == ".tmbk") found.insert(entry.path().stem().string());
        tokens.assign(found.begin(), found.end());
      }
      EmbeddingMatrix m;
      for (const auto& t : tokens) {
        const auto path = bank_path(banks_dir, t);
        if (!fs::exists(path)) throw DataError("missing bank snapshot " + path.string());
        m.add(extract_embedding(read_bank_file(path), t));
      }
      if (m.empty()) throw DataError("no bank snapshots in " + banks_dir);
      Output o(out_path, out);
      write_embeddings(*o, m, parse_embedding_format(format));
    } else if (*evsim) {
      const auto m = load_embeddings(fs::path(embeddings_path));
      const auto ds = load_similarity_dataset(dataset_path);
      const auto r = eval_similarity(m, ds);
      Output o(out_path, out);
      *o << similarity_json(ds, r).dump() << '\n';
    } else if (*evcls) {
      VoteParams knobs;
      knobs.vote_clip = classify_clip;
      const auto bank = read_bank_file(bank_file, knobs);
      const auto file = read_example_file(examples_file, bank.features());
      const auto m = precision_recall_f1(classify_documents(bank, file.examples), labels_of(file.examples));
      Output o(out_path, out);
      *o << nlohmann::json{{"kind", "classification"}, {"examples", file.examples.size()},
                           {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                           {"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}}.dump()
         << '\n';
    } else if (*clusters) {
      const auto m = load_embeddings(fs::path(embeddings_path));
      const auto groups = load_token_groups(groups_path);
      const auto rep = export_cluster_vectors(m, groups, tsv_path);
      nlohmann::json j{{"kind", "clusters"}, {"exported_rows", rep.exported_rows},
                       {"missing_tokens", rep.missing_tokens}, {"separation", rep.separation()}};
      j["intra_mean"] = rep.intra_mean ? nlohmann::json(*rep.intra_mean) : nlohmann::json(nullptr);
      j["inter_mean"] = rep.inter_mean ? nlohmann::json(*rep.inter_mean) : nlohmann::json(nullptr);
      Output o(out_path, out);
      *o << j.dump() << '\n';
    } else if (*bench) {
      BenchmarkOptions opt;
      opt.runs = runs;
      opt.platform_label = platform;
      opt.modes.clear();
      for (const auto& m : parse_token_list(modes)) {
        try {
          opt.modes.push_back(parse_train_mode(m));
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }
      if (runs < 1) throw UsageError("--runs must be >= 1");
      const auto tokens = parse_token_list(tokens_spec);
      std::uint32_t v = 0;
      const auto jobs = collect_jobs(examples_dir, tokens, v);
      const auto hp = bench_args.hyperparams(v);
      if (!dataset_path.empty()) opt.dataset = load_similarity_dataset(dataset_path);
      const auto report = benchmark_training(hp, jobs, opt);
      Output o(out_path, out);
      write_benchmark_report(*o, report);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_data;
  }
  return exit_ok;
}

}  // namespace omnitm::cli
