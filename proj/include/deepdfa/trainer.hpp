// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepdfa/automata.hpp"
#include "deepdfa/dataset.hpp"
#include "deepdfa/model.hpp"

namespace deepdfa {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 64;  // 0 = full batch
  std::size_t convergence_window = 10;
  double convergence_tol = 1e-5;
  double agreement_tol = 0.001;  // |discrete - continuous| train accuracy
  /// The stopping test is skipped while the train loss is above this
  /// fraction of the label-prior entropy (a model still on the plateau of
  /// the constant predictor).
  double plateau_guard = 0.5;
  std::uint64_t seed = 0;
  TraceMode mode = TraceMode::kCrisp;
  double init_stddev = 1.0;

  void validate() const;
};

nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& doc);
nlohmann::json schedule_to_json(const TempSchedule& schedule);
TempSchedule schedule_from_json(const nlohmann::json& doc);

struct EpochRecord {
  std::size_t epoch = 0;
  double tau = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;         // continuous, from the epoch's forward passes
  double train_acc_discrete = 0.0;
  double dev_acc = 0.0;           // continuous, after the epoch's updates
  double dev_acc_discrete = 0.0;
};

/// Everything needed to continue a run exactly where it stopped.
struct Checkpoint {
  Alphabet alphabet{1};
  ModelParams params{1, 1};
  AdamState optimizer;
  std::size_t epoch = 0;  // epochs completed
  double tau = 1.0;       // temperature of the last completed epoch
  TrainConfig config;
  TempSchedule schedule;
  std::vector<EpochRecord> history;
  bool finished = false;
  bool converged = false;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
/// Throws ParseError on a corrupt document.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// epoch,tau,train_loss,train_acc,dev_acc,dev_acc_discrete
std::string history_csv(const std::vector<EpochRecord>& history);

struct TrainResult {
  Checkpoint state;
  bool converged = false;
  std::string stop_reason;  // "converged", "max_epochs" or "stopped"
};

struct TrainOptions {
  /// Continue from a saved run instead of starting from scratch.
  std::optional<Checkpoint> resume;
  /// Stop (resumable) after this many epochs in total.
  std::optional<std::size_t> stop_after;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Annealed training: epoch e runs at tau(e) over shuffled mini-batches (or
/// one full batch), followed by discrete/continuous evaluation. Stops at
/// max_epochs, or when the train loss improved by less than the tolerance
/// over the window and the extracted automaton's train accuracy matches the
/// continuous model's (once the loss is below plateau_guard times the label
/// entropy). Throws NumericalError on a non-finite loss.
TrainResult train(const DatasetBundle& data, const Alphabet& alphabet,
                  std::size_t q_max, const TrainConfig& config,
                  const TempSchedule& schedule, const TrainOptions& options = {});

}  // namespace deepdfa
