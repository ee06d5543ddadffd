// SPDX-License-Identifier: Apache-2.0
#include "deepdfa/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "deepdfa/errors.hpp"

namespace deepdfa {

Dfa argmax_dfa(const ModelParams& params, const Alphabet& alphabet) {
  if (alphabet.size() != params.alphabet_size()) {
    throw InputError("alphabet size does not match the model");
  }
  const std::size_t q = params.q_max();
  Dfa dfa(alphabet, q);
  for (Symbol p = 0; p < params.alphabet_size(); ++p) {
    const auto logits = params.transition_logits(p);
    for (std::size_t r = 0; r < q; ++r) {
      const auto row = logits.subspan(r * q, q);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      dfa.set_transition(static_cast<StateId>(r), p, static_cast<StateId>(best));
    }
  }
  const auto theta_y = params.output_logits();
  for (std::size_t r = 0; r < q; ++r) {
    dfa.set_accepting(static_cast<StateId>(r), theta_y[r] > 0.0);
  }
  return dfa;
}

Dfa extract_dfa(const ModelParams& params, const Alphabet& alphabet,
                bool minimize) {
  Dfa trimmed = trim_unreachable(argmax_dfa(params, alphabet));
  return minimize ? hopcroft_minimize(trimmed) : trimmed;
}

Dfa extract_dfa(const ModelParams& params) {
  return extract_dfa(params, Alphabet(params.alphabet_size()));
}

bool initial_state_isolated(const Dfa& dfa) {
  const Dfa trimmed = trim_unreachable(dfa);
  for (StateId q = 0; q < trimmed.num_states(); ++q) {
    for (Symbol p = 0; p < trimmed.num_symbols(); ++p) {
      if (trimmed.next(q, p) == Dfa::initial()) return false;
    }
  }
  return true;
}

Dfa settle_empty_string(const Dfa& dfa, bool data_has_empty_trace) {
  Dfa kept = hopcroft_minimize(dfa);
  if (data_has_empty_trace || !initial_state_isolated(dfa)) return kept;
  Dfa flipped = dfa;
  flipped.set_accepting(Dfa::initial(), !dfa.accepting(Dfa::initial()));
  Dfa other = hopcroft_minimize(flipped);
  return other.num_states() < kept.num_states() ? other : kept;
}

std::size_t weight_count(std::size_t q_max, std::size_t alphabet_size) {
  return alphabet_size * q_max * q_max + 2 * q_max;
}

Accuracy accuracy(const Dfa& dfa, std::span<const TraceSample> samples) {
  if (samples.empty()) return {1.0, true};
  std::size_t correct = 0;
  std::vector<Symbol> buf;
  for (const auto& s : samples) {
    bool accepted = false;
    if (s.mode == TraceMode::kCrisp) {
      accepted = dfa_accepts(dfa, s.symbols);
    } else {
      buf.clear();
      for (const auto& b : s.beliefs) buf.push_back(nearest_one_hot(b));
      accepted = dfa_accepts(dfa, buf);
    }
    if (accepted == (s.label == 1)) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(samples.size()), false};
}

Accuracy accuracy_from_outputs(std::span<const double> outputs,
                               std::span<const TraceSample> samples) {
  if (outputs.size() != samples.size()) {
    throw InputError("one output per sample expected");
  }
  if (samples.empty()) return {1.0, true};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if ((outputs[i] > 0.5) == (samples[i].label == 1)) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(samples.size()), false};
}

Accuracy accuracy(const ModelParams& params, double tau,
                  std::span<const TraceSample> samples) {
  const auto outputs = predict(params, tau, samples);
  return accuracy_from_outputs(outputs, samples);
}

nlohmann::json report_to_json(const RunReport& r) {
  return {{"target", r.target},
          {"q_max", r.q_max},
          {"alphabet_size", r.alphabet_size},
          {"seed", r.seed},
          {"train_acc", r.train_acc},
          {"dev_acc", r.dev_acc},
          {"test_acc", r.test_acc},
          {"train_acc_dfa", r.train_acc_dfa},
          {"dev_acc_dfa", r.dev_acc_dfa},
          {"test_acc_dfa", r.test_acc_dfa},
          {"q_hat", r.q_hat},
          {"weights", r.weights},
          {"seconds", r.seconds},
          {"epochs", r.epochs},
          {"converged", r.converged},
          {"final_tau", r.final_tau},
          {"status", r.status},
          {"error", r.error},
          {"config", r.config}};
}

RunReport report_from_json(const nlohmann::json& doc) {
  try {
    RunReport r;
    r.target = doc.at("target").get<std::string>();
    r.q_max = doc.at("q_max").get<std::size_t>();
    r.alphabet_size = doc.at("alphabet_size").get<std::size_t>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.train_acc = doc.at("train_acc").get<double>();
    r.dev_acc = doc.at("dev_acc").get<double>();
    r.test_acc = doc.at("test_acc").get<double>();
    r.train_acc_dfa = doc.at("train_acc_dfa").get<double>();
    r.dev_acc_dfa = doc.at("dev_acc_dfa").get<double>();
    r.test_acc_dfa = doc.at("test_acc_dfa").get<double>();
    r.q_hat = doc.at("q_hat").get<std::size_t>();
    r.weights = doc.at("weights").get<std::size_t>();
    r.seconds = doc.at("seconds").get<double>();
    r.epochs = doc.at("epochs").get<std::size_t>();
    r.converged = doc.at("converged").get<bool>();
    r.final_tau = doc.at("final_tau").get<double>();
    r.status = doc.at("status").get<std::string>();
    r.error = doc.value("error", "");
    r.config = doc.value("config", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed run report: ") + e.what());
  }
}

bool better_run(const RunReport& a, const RunReport& b) {
  if (a.selection_dev_acc() != b.selection_dev_acc()) {
    return a.selection_dev_acc() > b.selection_dev_acc();
  }
  if (a.weights != b.weights) return a.weights < b.weights;
  if (a.q_hat != b.q_hat) return a.q_hat < b.q_hat;
  return a.seed < b.seed;
}

RunReport select_best(std::span<const RunReport> reports) {
  if (reports.empty()) throw InputError("select_best needs at least one report");
  return *std::min_element(reports.begin(), reports.end(), better_run);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) {
    out.mean = *lo;  // exact for constant samples
    return out;
  }
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

double median(std::span<const double> values) {
  if (values.empty()) throw InputError("median of an empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Aggregate best_k_of_n(std::span<const RunReport> reports, std::size_t k) {
  if (k == 0) throw InputError("k must be at least 1");
  if (k > reports.size()) {
    throw InputError("cannot keep " + std::to_string(k) + " of " +
                     std::to_string(reports.size()) + " runs");
  }
  std::vector<RunReport> sorted(reports.begin(), reports.end());
  std::stable_sort(sorted.begin(), sorted.end(), better_run);
  sorted.resize(k);

  std::vector<double> acc, states, secs;
  for (const auto& r : sorted) {
    acc.push_back(r.test_acc_dfa);
    states.push_back(static_cast<double>(r.q_hat));
    secs.push_back(r.seconds);
  }
  Aggregate agg;
  agg.k = k;
  agg.n = reports.size();
  agg.test_acc = mean_std(acc);
  agg.q_hat = mean_std(states);
  agg.seconds = mean_std(secs);
  agg.selected = std::move(sorted);
  return agg;
}

}  // namespace deepdfa
