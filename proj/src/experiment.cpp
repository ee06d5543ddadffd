// SPDX-License-Identifier: Apache-2.0
#include "deepdfa/experiment.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "deepdfa/errors.hpp"
#include "deepdfa/seed.hpp"
#include "deepdfa/tomita.hpp"

namespace deepdfa {

namespace {

struct TomitaSizes {
  std::size_t train, dev, test;
};

// Train/dev/test sizes per Tomita language.
constexpr std::array<TomitaSizes, 7> kTomitaSizes{{
    {325, 20, 20},
    {315, 20, 20},
    {2701, 20, 20},
    {3373, 40, 20},
    {1991, 300, 300},
    {3423, 300, 300},
    {1741, 20, 20},
}};

std::size_t random_train_size(std::size_t states, std::size_t symbols) {
  const bool ternary = symbols >= 3;
  if (states < 15) return ternary ? 4197 : 3341;
  if (states < 25) return ternary ? 4213 : 3435;
  return ternary ? 13557 : 12805;
}

}  // namespace

TargetSpec TargetSpec::tomita_language(int index) {
  TargetSpec s;
  s.kind = Kind::kTomita;
  s.tomita = tomita::TomitaId(index).index();
  return s;
}

TargetSpec TargetSpec::random(std::size_t states, std::size_t symbols,
                              std::uint64_t seed) {
  TargetSpec s;
  s.kind = Kind::kRandom;
  s.random_states = states;
  s.random_symbols = symbols;
  s.random_seed = seed;
  return s;
}

TargetSpec TargetSpec::dfa_file(std::string path) {
  TargetSpec s;
  s.kind = Kind::kDfaFile;
  s.path = std::move(path);
  return s;
}

Target resolve_target(const TargetSpec& spec) {
  Target t;
  switch (spec.kind) {
    case TargetSpec::Kind::kTomita: {
      const tomita::TomitaId id(spec.tomita);
      t.alphabet = tomita::binary_alphabet();
      t.oracle = [id](std::span<const Symbol> s) { return tomita::accepts(id, s); };
      t.dfa = tomita::dfa(id);
      t.name = "T" + std::to_string(spec.tomita);
      t.minimal_states = tomita::minimal_size(id);
      return t;
    }
    case TargetSpec::Kind::kRandom: {
      if (spec.random_states == 0 || spec.random_symbols == 0) {
        throw InputError("random targets need at least one state and symbol");
      }
      t.alphabet = Alphabet(spec.random_symbols);
      t.dfa = random_dfa(spec.random_states, t.alphabet, spec.random_seed);
      t.name = "random-Q" + std::to_string(spec.random_states) + "-P" +
               std::to_string(spec.random_symbols) + "-s" +
               std::to_string(spec.random_seed);
      break;
    }
    case TargetSpec::Kind::kDfaFile: {
      std::ifstream in(spec.path, std::ios::binary);
      if (!in) throw InputError("cannot open DFA file " + spec.path);
      std::stringstream buf;
      buf << in.rdbuf();
      t.dfa = dfa_from_json_text(buf.str());
      t.alphabet = t.dfa->alphabet();
      t.name = spec.path;
      break;
    }
  }
  const Dfa dfa = *t.dfa;
  t.oracle = [dfa](std::span<const Symbol> s) { return dfa_accepts(dfa, s); };
  t.minimal_states = hopcroft_minimize(trim_unreachable(dfa)).num_states();
  return t;
}

SplitSizes default_sizes(const TargetSpec& spec) {
  SplitSizes s;
  if (spec.kind == TargetSpec::Kind::kTomita) {
    const auto& row = kTomitaSizes[static_cast<std::size_t>(spec.tomita - 1)];
    s.train = row.train;
    s.dev = row.dev;
    s.test = row.test;
    s.len_train = 30;
    return s;
  }
  const std::size_t states = spec.kind == TargetSpec::Kind::kRandom ? spec.random_states : 10;
  const std::size_t symbols = spec.kind == TargetSpec::Kind::kRandom ? spec.random_symbols : 2;
  s.train = random_train_size(states, symbols);
  s.dev = 150;
  s.test = 150;
  s.len_train = states >= 30 ? 50 : 30;
  return s;
}

Samples to_one_hot_beliefs(const Samples& samples, std::size_t alphabet_size) {
  return corrupt_symbols_gaussian(samples, alphabet_size, 0.0, 0);
}

DatasetBundle build_dataset(const Target& target, const TargetSpec& spec,
                            const DatasetParams& params) {
  const SplitSizes def = default_sizes(spec);
  const std::size_t n_train = params.train_size.value_or(def.train);
  const std::size_t n_dev = params.dev_size.value_or(def.dev);
  const std::size_t n_test = params.test_size.value_or(def.test);
  const std::size_t len = params.len_train.value_or(def.len_train);
  const std::size_t k = target.alphabet.size();

  DatasetBundle b;
  b.train = sample_balanced_train(target.oracle, k, len, n_train,
                                  derive_seed(params.seed, "train"));
  b.dev = sample_fixed_length(target.oracle, k, 2 * len, n_dev,
                              derive_seed(params.seed, "dev"));
  b.test = sample_fixed_length(target.oracle, k, 3 * len, n_test,
                               derive_seed(params.seed, "test"));
  if (params.flip > 0.0) {
    b.train = flip_labels(b.train, params.flip, derive_seed(params.seed, "flip"));
  }
  const bool belief = params.symbol_noise > 0.0;
  if (belief) {
    b.train = corrupt_symbols_gaussian(
        b.train, k, params.symbol_noise, derive_seed(params.seed, "symbol-noise"),
        params.symbol_noise_raw ? SimplexProjection::kNone
                                : SimplexProjection::kClampRenormalize);
    b.dev = to_one_hot_beliefs(b.dev, k);
    b.test = to_one_hot_beliefs(b.test, k);
  }
  b.metadata = {
      {"target", target.name},
      {"seed", params.seed},
      {"sizes", {{"train", n_train}, {"dev", n_dev}, {"test", n_test}}},
      {"lengths", {{"train", {1, len}}, {"dev", 2 * len}, {"test", 3 * len}}},
      {"label_flip_fraction", params.flip},
      {"symbol_noise_variance", params.symbol_noise},
      {"symbol_noise_projection", params.symbol_noise_raw ? "none" : "clamp-renormalize"},
      {"mode", belief ? "belief" : "crisp"},
      {"train_positive", count_positive(b.train)},
      {"dedup_policy",
       "train strings distinct while the class has unseen strings; repeats only "
       "to fill a class whose distinct strings ran out; dev/test sampled "
       "independently of train"},
      {"seed_derivation", "derive_seed(seed, split) with split in "
                          "{train, dev, test, flip, symbol-noise}"},
  };
  return b;
}

RunOutcome run_training(const Target& target, const DatasetBundle& data,
                        const RunSpec& spec, const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  TrainResult result = train(data, target.alphabet, spec.q_max, spec.train,
                             spec.schedule, options);
  const Checkpoint& state = result.state;
  const double tau = state.tau;

  RunOutcome out;
  bool has_empty = false;
  for (const auto& s : data.train) has_empty |= s.length() == 0;
  out.extracted = settle_empty_string(
      extract_dfa(state.params, target.alphabet, /*minimize=*/false), has_empty);
  RunReport& r = out.report;
  r.target = target.name;
  r.q_max = spec.q_max;
  r.alphabet_size = target.alphabet.size();
  r.seed = spec.train.seed;
  r.train_acc = accuracy(state.params, tau, data.train).value;
  r.dev_acc = accuracy(state.params, tau, data.dev).value;
  r.test_acc = accuracy(state.params, tau, data.test).value;
  r.train_acc_dfa = accuracy(out.extracted, data.train).value;
  r.dev_acc_dfa = accuracy(out.extracted, data.dev).value;
  r.test_acc_dfa = accuracy(out.extracted, data.test).value;
  r.q_hat = out.extracted.num_states();
  r.weights = weight_count(spec.q_max, target.alphabet.size());
  r.epochs = state.epoch;
  r.converged = result.converged;
  r.final_tau = tau;
  r.config = {{"q_max", spec.q_max},
              {"train", config_to_json(spec.train)},
              {"schedule", schedule_to_json(spec.schedule)},
              {"dataset", data.metadata},
              {"stop_reason", result.stop_reason},
              {"empty_string", has_empty ? "from data" : "smaller automaton when unconstrained"}};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                  .count();
  out.checkpoint = result.state;
  return out;
}

RunOutcome run_cell(const TargetSpec& target, const DatasetParams& data,
                    const RunSpec& run) {
  const Target t = resolve_target(target);
  return run_training(t, build_dataset(t, target, data), run);
}

std::vector<RunReport> run_parallel(
    const std::vector<std::function<RunReport()>>& work, std::size_t jobs) {
  std::vector<RunReport> results(work.size());
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, std::max<std::size_t>(work.size(), 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      try {
        results[i] = work[i]();
      } catch (const std::exception& e) {
        results[i].status = "failed";
        results[i].error = e.what();
      }
    }
  };
  if (jobs <= 1) {
    worker();
    return results;
  }
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

std::string runs_csv(const std::vector<RunReport>& reports) {
  std::ostringstream out;
  out << "target,q_max,seed,test_acc,dev_acc,q_hat,weights,seconds\n";
  char buf[512];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%llu,%.6f,%.6f,%zu,%zu,%.3f\n",
                  r.target.c_str(), r.q_max,
                  static_cast<unsigned long long>(r.seed), r.test_acc_dfa,
                  r.dev_acc_dfa, r.q_hat, r.weights, r.seconds);
    out << buf;
  }
  return out.str();
}

std::uint64_t run_seed(std::uint64_t root, std::size_t index) {
  return derive_seed(root, "run", index);
}

std::uint64_t dataset_seed(std::uint64_t root, const std::string& target) {
  std::uint64_t h = 0;
  for (char c : target) h = h * 131 + static_cast<unsigned char>(c);
  return derive_seed(root, "dataset", h);
}

}  // namespace deepdfa
