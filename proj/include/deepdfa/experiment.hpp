// SPDX-License-Identifier: Apache-2.0
//
// Experiment plumbing shared by the command-line tool and the acceptance
// suite: target resolution, default dataset sizes, single training runs and
// parallel sweeps.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepdfa/automata.hpp"
#include "deepdfa/dataset.hpp"
#include "deepdfa/evaluation.hpp"
#include "deepdfa/model.hpp"
#include "deepdfa/trainer.hpp"

namespace deepdfa {

struct TargetSpec {
  enum class Kind { kTomita, kRandom, kDfaFile };
  Kind kind = Kind::kTomita;
  int tomita = 1;
  std::size_t random_states = 10;
  std::size_t random_symbols = 2;
  std::uint64_t random_seed = 0;
  std::string path;

  static TargetSpec tomita_language(int index);
  static TargetSpec random(std::size_t states, std::size_t symbols,
                           std::uint64_t seed);
  static TargetSpec dfa_file(std::string path);
};

/// A ground-truth language: its alphabet, a membership oracle and, when
/// known, an automaton.
struct Target {
  Alphabet alphabet{1};
  MembershipOracle oracle;
  std::optional<Dfa> dfa;
  std::string name;
  std::size_t minimal_states = 0;  // 0 when unknown
};

Target resolve_target(const TargetSpec& spec);

struct DatasetParams {
  std::optional<std::size_t> train_size;
  std::optional<std::size_t> dev_size;
  std::optional<std::size_t> test_size;
  std::optional<std::size_t> len_train;  // dev uses 2x, test 3x
  double flip = 0.0;                     // fraction of train labels flipped
  double symbol_noise = 0.0;             // Gaussian variance on train symbols
  bool symbol_noise_raw = false;         // skip the simplex projection
  std::uint64_t seed = 0;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
  std::size_t len_train = 30;
};

/// Sizes used when none are given: the Tomita table per language, and
/// 150-trace dev/test sets for random targets with train sets growing with
/// |Q| and |P| (length 50 for |Q| >= 30).
SplitSizes default_sizes(const TargetSpec& spec);

/// Train/dev/test for the target. With symbol noise the train set is in
/// belief mode and the clean dev/test sets are one-hot belief traces.
DatasetBundle build_dataset(const Target& target, const TargetSpec& spec,
                            const DatasetParams& params);

/// Converts crisp traces to exact one-hot belief traces.
Samples to_one_hot_beliefs(const Samples& samples, std::size_t alphabet_size);

struct RunSpec {
  std::size_t q_max = 10;
  TrainConfig train;
  TempSchedule schedule;
};

struct RunOutcome {
  RunReport report;
  Checkpoint checkpoint;
  Dfa extracted{Alphabet(1), 1};
};

/// Trains, extracts, minimizes and evaluates one model.
RunOutcome run_training(const Target& target, const DatasetBundle& data,
                        const RunSpec& spec, const TrainOptions& options = {});

/// One sweep cell: resolves the target, builds its dataset and trains.
RunOutcome run_cell(const TargetSpec& target, const DatasetParams& data,
                    const RunSpec& run);

/// Runs independent jobs on `jobs` worker threads (0 = hardware threads).
/// Results come back in job order; a job that throws yields a report with
/// status "failed".
std::vector<RunReport> run_parallel(
    const std::vector<std::function<RunReport()>>& work, std::size_t jobs);

/// target,q_max,seed,test_acc,dev_acc,q_hat,weights,seconds
std::string runs_csv(const std::vector<RunReport>& reports);

/// Root-seed derivation for run i of a sweep.
std::uint64_t run_seed(std::uint64_t root, std::size_t index);
std::uint64_t dataset_seed(std::uint64_t root, const std::string& target);

}  // namespace deepdfa
