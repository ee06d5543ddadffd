// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used only by the tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "deepdfa/automata.hpp"
#include "deepdfa/dataset.hpp"
#include "deepdfa/model.hpp"

namespace deepdfa::testing {

/// Every string over k symbols of length exactly n, in lexicographic order.
inline std::vector<std::vector<Symbol>> all_strings(std::size_t k, std::size_t n) {
  std::vector<std::vector<Symbol>> out;
  std::vector<Symbol> cur(n, 0);
  for (;;) {
    out.push_back(cur);
    std::size_t i = n;
    while (i > 0) {
      --i;
      if (++cur[i] < k) break;
      cur[i] = 0;
      if (i == 0) return out;
    }
    if (n == 0) return out;
  }
}

/// Reachable states from state 0 by plain DFS.
inline std::set<StateId> reachable(const Dfa& dfa) {
  std::set<StateId> seen{0};
  std::vector<StateId> stack{0};
  while (!stack.empty()) {
    const StateId q = stack.back();
    stack.pop_back();
    for (Symbol p = 0; p < dfa.num_symbols(); ++p) {
      if (seen.insert(dfa.next(q, p)).second) stack.push_back(dfa.next(q, p));
    }
  }
  return seen;
}

/// Myhill-Nerode count: reachable states grouped by their acceptance
/// signature over every suffix of length < n. Two states of an n-state DFA
/// that are distinguishable at all are distinguished by such a suffix.
inline std::size_t myhill_nerode_size(const Dfa& dfa) {
  const auto states = reachable(dfa);
  std::vector<std::vector<Symbol>> suffixes;
  for (std::size_t len = 0; len < states.size(); ++len) {
    const auto block = all_strings(dfa.num_symbols(), len);
    suffixes.insert(suffixes.end(), block.begin(), block.end());
  }
  std::set<std::vector<bool>> classes;
  for (StateId q : states) {
    std::vector<bool> sig;
    sig.reserve(suffixes.size());
    for (const auto& s : suffixes) {
      StateId cur = q;
      for (Symbol p : s) cur = dfa.next(cur, p);
      sig.push_back(dfa.accepting(cur));
    }
    classes.insert(std::move(sig));
  }
  return classes.size();
}

/// Table-filling distinguishability on the reachable part, iterated to a
/// fixpoint; returns the number of equivalence classes.
inline std::size_t table_filling_size(const Dfa& dfa) {
  const auto set = reachable(dfa);
  const std::vector<StateId> states(set.begin(), set.end());
  const std::size_t n = states.size();
  std::vector<std::vector<bool>> dist(n, std::vector<bool>(n, false));
  std::map<StateId, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[states[i]] = i;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dist[i][j] = dfa.accepting(states[i]) != dfa.accepting(states[j]);
    }
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (dist[i][j]) continue;
        for (Symbol p = 0; p < dfa.num_symbols(); ++p) {
          if (dist[index[dfa.next(states[i], p)]][index[dfa.next(states[j], p)]]) {
            dist[i][j] = true;
            changed = true;
            break;
          }
        }
      }
    }
  }
  std::size_t classes = 0;
  std::vector<bool> assigned(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (assigned[i]) continue;
    ++classes;
    for (std::size_t j = i; j < n; ++j) {
      if (!dist[i][j]) assigned[j] = true;
    }
  }
  return classes;
}

/// Direct step-by-step evaluation of v_i T[x0] ... T[x_{l-1}] v_o.
inline double pfa_product(const Pfa& pfa, const std::vector<Symbol>& trace) {
  std::vector<double> h = pfa.input_vec();
  const std::size_t n = pfa.num_states();
  for (Symbol p : trace) {
    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        next[j] += h[i] * pfa.transition(p, static_cast<StateId>(i), static_cast<StateId>(j));
      }
    }
    h = next;
  }
  double y = 0.0;
  for (std::size_t i = 0; i < n; ++i) y += h[i] * pfa.output_vec()[i];
  return y;
}

inline std::vector<Symbol> random_trace(std::mt19937_64& rng, std::size_t k,
                                        std::size_t max_len) {
  const std::size_t len = std::uniform_int_distribution<std::size_t>(0, max_len)(rng);
  std::vector<Symbol> out(len);
  for (auto& s : out) s = static_cast<Symbol>(std::uniform_int_distribution<std::size_t>(0, k - 1)(rng));
  return out;
}

/// Mean BCE over a batch from the per-trace reference forward pass.
inline double reference_loss(const ModelParams& params, double tau,
                             const Samples& batch) {
  double sum = 0.0;
  for (const auto& s : batch) sum += bce_loss(forward(params, tau, s).output, s.label);
  return sum / static_cast<double>(batch.size());
}

/// Central finite differences of reference_loss, returning the maximum
/// relative error against `analytic` (denominator floored at `floor`).
inline double max_fd_relative_error(const ModelParams& params, double tau,
                                    const Samples& batch,
                                    const std::vector<double>& analytic,
                                    double step = 1e-4, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.values().size(); ++i) {
    ModelParams plus = params;
    ModelParams minus = params;
    plus.values()[i] += step;
    minus.values()[i] -= step;
    const double fd =
        (reference_loss(plus, tau, batch) - reference_loss(minus, tau, batch)) / (2 * step);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), floor});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

/// Logits embedding a DFA: +big on each transition target, -big elsewhere,
/// and +-big on the outputs.
inline ModelParams embed_dfa(const Dfa& dfa, std::size_t q_max, double big = 20.0) {
  ModelParams params(dfa.num_symbols(), q_max);
  for (Symbol p = 0; p < dfa.num_symbols(); ++p) {
    for (StateId from = 0; from < q_max; ++from) {
      for (StateId to = 0; to < q_max; ++to) {
        const bool hit = from < dfa.num_states() ? dfa.next(from, p) == to : to == from;
        params.transition_logit(p, from, to) = hit ? big : -big;
      }
    }
  }
  auto out = params.output_logits();
  for (StateId q = 0; q < q_max; ++q) {
    out[q] = q < dfa.num_states() && dfa.accepting(q) ? big : -big;
  }
  return params;
}

}  // namespace deepdfa::testing
