// SPDX-License-Identifier: Apache-2.0
//
// Exact automata semantics: dense complete DFAs, probabilistic automata in
// matrix form, and the classical algorithms on top of them (simulation,
// trimming, Hopcroft minimization, equivalence, random generation,
// serialization).
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace deepdfa {

using Symbol = std::uint32_t;
using StateId = std::uint32_t;

/// Integer-indexed alphabet 0..size-1 with optional display names.
class Alphabet {
 public:
  /// Names default to "a", "b", ... (or "s<i>" past 26 symbols).
  explicit Alphabet(std::size_t size);
  explicit Alphabet(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(Symbol s) const;
  const std::vector<std::string>& names() const noexcept { return names_; }

  bool contains(Symbol s) const noexcept { return s < names_.size(); }
  void check(Symbol s) const;
  void check(std::span<const Symbol> trace) const;

  bool operator==(const Alphabet&) const = default;

 private:
  std::vector<std::string> names_;
};

/// Complete DFA with a dense |Q| x |P| transition table. State 0 is initial.
class Dfa {
 public:
  /// All transitions point to state 0 and no state accepts.
  Dfa(Alphabet alphabet, std::size_t num_states);

  /// `delta[q][p]` is the successor of q on p. Throws InputError on a
  /// malformed table.
  Dfa(Alphabet alphabet, const std::vector<std::vector<StateId>>& delta,
      std::vector<bool> accepting);

  const Alphabet& alphabet() const noexcept { return alphabet_; }
  std::size_t num_states() const noexcept { return accepting_.size(); }
  std::size_t num_symbols() const noexcept { return alphabet_.size(); }
  static constexpr StateId initial() noexcept { return 0; }

  StateId next(StateId q, Symbol p) const {
    return delta_[static_cast<std::size_t>(q) * num_symbols() + p];
  }
  bool accepting(StateId q) const { return accepting_[q]; }
  const std::vector<bool>& accepting_states() const noexcept {
    return accepting_;
  }

  void set_transition(StateId q, Symbol p, StateId target);
  void set_accepting(StateId q, bool value);

  /// Runs the trace from the initial state and returns the final state.
  StateId run(std::span<const Symbol> trace) const;

  bool operator==(const Dfa&) const = default;

 private:
  Alphabet alphabet_;
  std::vector<StateId> delta_;
  std::vector<bool> accepting_;
};

/// Probabilistic automaton in matrix form: transition tensor T[p][q][q'],
/// initial row vector and acceptance column vector.
class Pfa {
 public:
  /// `transition` is |P|*|Q|*|Q| row-major. Throws InputError unless every
  /// transition row and the input vector are stochastic (1e-9) and the
  /// output vector lies in [0,1].
  Pfa(std::size_t num_symbols, std::size_t num_states,
      std::vector<double> transition, std::vector<double> input_vec,
      std::vector<double> output_vec);

  std::size_t num_symbols() const noexcept { return num_symbols_; }
  std::size_t num_states() const noexcept { return num_states_; }

  double transition(Symbol p, StateId from, StateId to) const {
    return transition_[(static_cast<std::size_t>(p) * num_states_ + from) *
                           num_states_ +
                       to];
  }
  std::span<const double> row(Symbol p, StateId from) const;
  const std::vector<double>& input_vec() const noexcept { return input_; }
  const std::vector<double>& output_vec() const noexcept { return output_; }

 private:
  std::size_t num_symbols_;
  std::size_t num_states_;
  std::vector<double> transition_;
  std::vector<double> input_;
  std::vector<double> output_;
};

bool dfa_accepts(const Dfa& dfa, std::span<const Symbol> trace);

/// v_i T[x0] ... T[x_{l-1}] v_o
double pfa_accept_prob(const Pfa& pfa, std::span<const Symbol> trace);

Pfa dfa_to_pfa(const Dfa& dfa);

/// Row-wise argmax (lowest index on ties); accepting iff v_o > 0.5. The
/// argmax of v_i is swapped into position 0.
Dfa pfa_argmax_dfa(const Pfa& pfa, const Alphabet& alphabet);
Dfa pfa_argmax_dfa(const Pfa& pfa);

/// Restricts to states reachable from the initial state, numbered in BFS
/// order (symbols ascending).
Dfa trim_unreachable(const Dfa& dfa);

/// Minimal complete DFA for the same language, states numbered in BFS order
/// from the initial state. Unreachable states are dropped.
Dfa hopcroft_minimize(const Dfa& dfa);

/// Language equality via BFS over the product automaton.
bool dfa_equivalent(const Dfa& a, const Dfa& b);

/// Random complete DFA in which every state is reachable from state 0.
Dfa random_dfa(std::size_t num_states, const Alphabet& alphabet,
               std::uint64_t seed);

std::string export_dot(const Dfa& dfa);

nlohmann::json dfa_to_json(const Dfa& dfa);
/// Throws ParseError naming the offending field.
Dfa dfa_from_json(const nlohmann::json& doc);

/// Newline-terminated, two-space indented JSON text.
std::string dfa_to_json_text(const Dfa& dfa);
Dfa dfa_from_json_text(const std::string& text);

}  // namespace deepdfa
