// SPDX-License-Identifier: Apache-2.0
//
// Reading a crisp automaton out of trained logits, accuracy metrics, run
// reports and the selection rules used to aggregate repeated runs.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepdfa/automata.hpp"
#include "deepdfa/dataset.hpp"
#include "deepdfa/model.hpp"

namespace deepdfa {

/// Per-row argmax of theta_h (lowest index on ties) with accepting states
/// {q : theta_y[q] > 0}, before trimming or minimization. Softmax and
/// sigmoid are monotone, so this is the argmax automaton at every tau > 0.
Dfa argmax_dfa(const ModelParams& params, const Alphabet& alphabet);

/// argmax_dfa, then trim_unreachable, then hopcroft_minimize (unless
/// `minimize` is false, in which case only the trim is applied).
Dfa extract_dfa(const ModelParams& params, const Alphabet& alphabet,
                bool minimize = true);
Dfa extract_dfa(const ModelParams& params);

/// True if no transition of a reachable state enters the initial state, so
/// its acceptance bit only decides the empty string.
bool initial_state_isolated(const Dfa& dfa);

/// When the initial state is isolated and the training data holds no empty
/// trace, the bit is unconstrained; returns the smaller of the two minimal
/// automata (the unchanged one on a tie). Otherwise returns `dfa` minimized.
Dfa settle_empty_string(const Dfa& dfa, bool data_has_empty_trace);

/// |P| * q_max^2 + 2 * q_max: transition logits plus output and initial
/// vectors.
std::size_t weight_count(std::size_t q_max, std::size_t alphabet_size);

struct Accuracy {
  double value = 1.0;
  bool empty = false;  // set when there were no samples (value is 1.0)
};

/// Fraction of samples whose predicted acceptance matches the label. Belief
/// traces are read through nearest_one_hot.
Accuracy accuracy(const Dfa& dfa, std::span<const TraceSample> samples);
/// Prediction is y > 0.5 at the given temperature.
Accuracy accuracy(const ModelParams& params, double tau,
                  std::span<const TraceSample> samples);
Accuracy accuracy_from_outputs(std::span<const double> outputs,
                               std::span<const TraceSample> samples);

struct RunReport {
  std::string target;
  std::size_t q_max = 0;
  std::size_t alphabet_size = 0;
  std::uint64_t seed = 0;

  double train_acc = 0.0;      // continuous model
  double dev_acc = 0.0;        // continuous model
  double test_acc = 0.0;       // continuous model
  double train_acc_dfa = 0.0;  // extracted automaton
  double dev_acc_dfa = 0.0;
  double test_acc_dfa = 0.0;

  std::size_t q_hat = 0;    // states after trim + minimize
  std::size_t weights = 0;  // weight_count(q_max, |P|)
  double seconds = 0.0;
  std::size_t epochs = 0;
  bool converged = false;
  double final_tau = 0.0;

  std::string status = "ok";  // "ok" or "failed"
  std::string error;
  nlohmann::json config = nlohmann::json::object();

  /// Accuracy used for model selection (the extracted automaton's).
  double selection_dev_acc() const noexcept { return dev_acc_dfa; }
};

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

/// Strict weak order used by selection: higher dev accuracy, then fewer
/// weights, then fewer states, then lower seed.
bool better_run(const RunReport& a, const RunReport& b);

/// Throws InputError on an empty list.
RunReport select_best(std::span<const RunReport> reports);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (0 for one value)
};

MeanStd mean_std(std::span<const double> values);

/// Middle value; the mean of the two middle values for even counts. Throws
/// InputError on an empty list.
double median(std::span<const double> values);

struct Aggregate {
  std::size_t k = 0;
  std::size_t n = 0;
  MeanStd test_acc;
  MeanStd q_hat;
  MeanStd seconds;
  std::vector<RunReport> selected;
};

/// Top-k runs under better_run, summarized. Throws InputError if k > n or
/// k == 0.
Aggregate best_k_of_n(std::span<const RunReport> reports, std::size_t k);

}  // namespace deepdfa
