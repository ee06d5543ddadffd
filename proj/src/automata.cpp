// SPDX-License-Identifier: Apache-2.0
#include "deepdfa/automata.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "deepdfa/errors.hpp"

namespace deepdfa {

namespace {

constexpr double kStochasticTol = 1e-9;
constexpr StateId kUnset = static_cast<StateId>(-1);

std::vector<std::string> default_names(std::size_t size) {
  std::vector<std::string> names;
  names.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    if (size <= 26) {
      names.emplace_back(1, static_cast<char>('a' + i));
    } else {
      names.push_back("s" + std::to_string(i));
    }
  }
  return names;
}

// Swaps the roles of states `a` and `b` (used to move an initial state to 0).
Dfa swap_states(const Dfa& dfa, StateId a, StateId b) {
  if (a == b) return dfa;
  auto rename = [&](StateId q) { return q == a ? b : (q == b ? a : q); };
  Dfa out(dfa.alphabet(), dfa.num_states());
  for (StateId q = 0; q < dfa.num_states(); ++q) {
    for (Symbol p = 0; p < dfa.num_symbols(); ++p) {
      out.set_transition(rename(q), p, rename(dfa.next(q, p)));
    }
    out.set_accepting(rename(q), dfa.accepting(q));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Alphabet

Alphabet::Alphabet(std::size_t size) : names_(default_names(size)) {
  if (size == 0) throw InputError("alphabet size must be at least 1");
}

Alphabet::Alphabet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw InputError("alphabet size must be at least 1");
}

const std::string& Alphabet::name(Symbol s) const {
  check(s);
  return names_[s];
}

void Alphabet::check(Symbol s) const {
  if (!contains(s)) {
    throw InputError("symbol " + std::to_string(s) +
                     " out of range for alphabet of size " +
                     std::to_string(size()));
  }
}

void Alphabet::check(std::span<const Symbol> trace) const {
  for (Symbol s : trace) check(s);
}

// ---------------------------------------------------------------------------
// Dfa

Dfa::Dfa(Alphabet alphabet, std::size_t num_states)
    : alphabet_(std::move(alphabet)),
      delta_(num_states * alphabet_.size(), 0),
      accepting_(num_states, false) {
  if (num_states == 0) throw InputError("a DFA needs at least one state");
}

Dfa::Dfa(Alphabet alphabet, const std::vector<std::vector<StateId>>& delta,
         std::vector<bool> accepting)
    : alphabet_(std::move(alphabet)), accepting_(std::move(accepting)) {
  const std::size_t n = accepting_.size();
  if (n == 0) throw InputError("a DFA needs at least one state");
  if (delta.size() != n) {
    throw InputError("delta has " + std::to_string(delta.size()) +
                     " rows but there are " + std::to_string(n) + " states");
  }
  delta_.reserve(n * alphabet_.size());
  for (std::size_t q = 0; q < n; ++q) {
    if (delta[q].size() != alphabet_.size()) {
      throw InputError("delta row " + std::to_string(q) +
                       " does not match the alphabet size");
    }
    for (StateId target : delta[q]) {
      if (target >= n) throw InputError("transition target out of range");
      delta_.push_back(target);
    }
  }
}

void Dfa::set_transition(StateId q, Symbol p, StateId target) {
  if (q >= num_states() || target >= num_states()) {
    throw InputError("transition target out of range");
  }
  alphabet_.check(p);
  delta_[static_cast<std::size_t>(q) * num_symbols() + p] = target;
}

void Dfa::set_accepting(StateId q, bool value) {
  if (q >= num_states()) throw InputError("state out of range");
  accepting_[q] = value;
}

StateId Dfa::run(std::span<const Symbol> trace) const {
  StateId q = initial();
  for (Symbol p : trace) {
    alphabet_.check(p);
    q = next(q, p);
  }
  return q;
}

// ---------------------------------------------------------------------------
// Pfa

Pfa::Pfa(std::size_t num_symbols, std::size_t num_states,
         std::vector<double> transition, std::vector<double> input_vec,
         std::vector<double> output_vec)
    : num_symbols_(num_symbols),
      num_states_(num_states),
      transition_(std::move(transition)),
      input_(std::move(input_vec)),
      output_(std::move(output_vec)) {
  if (num_symbols_ == 0 || num_states_ == 0) {
    throw InputError("a PFA needs at least one symbol and one state");
  }
  if (transition_.size() != num_symbols_ * num_states_ * num_states_ ||
      input_.size() != num_states_ || output_.size() != num_states_) {
    throw InputError("PFA tensor shapes do not match |P| and |Q|");
  }
  auto check_stochastic = [](std::span<const double> row,
                             const std::string& what) {
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw InputError(what + " has a negative entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
      throw InputError(what + " does not sum to 1");
    }
  };
  for (Symbol p = 0; p < num_symbols_; ++p) {
    for (StateId q = 0; q < num_states_; ++q) {
      check_stochastic(row(p, q), "transition row");
    }
  }
  check_stochastic(input_, "input vector");
  for (double v : output_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InputError("output vector entry outside [0,1]");
    }
  }
}

std::span<const double> Pfa::row(Symbol p, StateId from) const {
  return {transition_.data() +
              (static_cast<std::size_t>(p) * num_states_ + from) * num_states_,
          num_states_};
}

// ---------------------------------------------------------------------------
// Simulation and conversions

bool dfa_accepts(const Dfa& dfa, std::span<const Symbol> trace) {
  return dfa.accepting(dfa.run(trace));
}

double pfa_accept_prob(const Pfa& pfa, std::span<const Symbol> trace) {
  const std::size_t n = pfa.num_states();
  std::vector<double> state = pfa.input_vec();
  std::vector<double> next(n);
  for (Symbol p : trace) {
    if (p >= pfa.num_symbols()) {
      throw InputError("symbol " + std::to_string(p) + " out of range");
    }
    std::fill(next.begin(), next.end(), 0.0);
    for (StateId q = 0; q < n; ++q) {
      if (state[q] == 0.0) continue;
      auto r = pfa.row(p, q);
      for (StateId q2 = 0; q2 < n; ++q2) next[q2] += state[q] * r[q2];
    }
    state.swap(next);
  }
  double y = 0.0;
  for (StateId q = 0; q < n; ++q) y += state[q] * pfa.output_vec()[q];
  return y;
}

Pfa dfa_to_pfa(const Dfa& dfa) {
  const std::size_t n = dfa.num_states();
  const std::size_t k = dfa.num_symbols();
  std::vector<double> t(k * n * n, 0.0);
  for (Symbol p = 0; p < k; ++p) {
    for (StateId q = 0; q < n; ++q) {
      t[(p * n + q) * n + dfa.next(q, p)] = 1.0;
    }
  }
  std::vector<double> vi(n, 0.0);
  vi[Dfa::initial()] = 1.0;
  std::vector<double> vo(n);
  for (StateId q = 0; q < n; ++q) vo[q] = dfa.accepting(q) ? 1.0 : 0.0;
  return Pfa(k, n, std::move(t), std::move(vi), std::move(vo));
}

Dfa pfa_argmax_dfa(const Pfa& pfa, const Alphabet& alphabet) {
  if (alphabet.size() != pfa.num_symbols()) {
    throw InputError("alphabet size does not match the PFA");
  }
  const std::size_t n = pfa.num_states();
  Dfa out(alphabet, n);
  for (Symbol p = 0; p < pfa.num_symbols(); ++p) {
    for (StateId q = 0; q < n; ++q) {
      auto r = pfa.row(p, q);
      // max_element returns the first maximum, i.e. the lowest index.
      out.set_transition(q, p,
                         static_cast<StateId>(std::max_element(r.begin(), r.end()) -
                                              r.begin()));
    }
  }
  for (StateId q = 0; q < n; ++q) out.set_accepting(q, pfa.output_vec()[q] > 0.5);
  const auto& vi = pfa.input_vec();
  const auto init = static_cast<StateId>(
      std::max_element(vi.begin(), vi.end()) - vi.begin());
  return swap_states(out, 0, init);
}

Dfa pfa_argmax_dfa(const Pfa& pfa) {
  return pfa_argmax_dfa(pfa, Alphabet(pfa.num_symbols()));
}

// ---------------------------------------------------------------------------
// Trimming and minimization

Dfa trim_unreachable(const Dfa& dfa) {
  std::vector<StateId> index(dfa.num_states(), kUnset);
  std::vector<StateId> order{Dfa::initial()};
  index[Dfa::initial()] = 0;
  for (std::size_t head = 0; head < order.size(); ++head) {
    const StateId q = order[head];
    for (Symbol p = 0; p < dfa.num_symbols(); ++p) {
      const StateId r = dfa.next(q, p);
      if (index[r] == kUnset) {
        index[r] = static_cast<StateId>(order.size());
        order.push_back(r);
      }
    }
  }
  Dfa out(dfa.alphabet(), order.size());
  for (StateId i = 0; i < order.size(); ++i) {
    for (Symbol p = 0; p < dfa.num_symbols(); ++p) {
      out.set_transition(i, p, index[dfa.next(order[i], p)]);
    }
    out.set_accepting(i, dfa.accepting(order[i]));
  }
  return out;
}

Dfa hopcroft_minimize(const Dfa& dfa) {
  const std::size_t n = dfa.num_states();
  const std::size_t k = dfa.num_symbols();

  // Inverse transitions in CSR form: preds of q on p.
  std::vector<std::size_t> inv_start(n * k + 1, 0);
  for (StateId q = 0; q < n; ++q) {
    for (Symbol p = 0; p < k; ++p) ++inv_start[dfa.next(q, p) * k + p + 1];
  }
  std::partial_sum(inv_start.begin(), inv_start.end(), inv_start.begin());
  std::vector<StateId> inv(n * k);
  {
    std::vector<std::size_t> fill(inv_start.begin(), inv_start.end() - 1);
    for (StateId q = 0; q < n; ++q) {
      for (Symbol p = 0; p < k; ++p) inv[fill[dfa.next(q, p) * k + p]++] = q;
    }
  }

  // Partition as a permutation of states where each block is a contiguous
  // range [first, last); `where` is the position of each state.
  std::vector<StateId> elems(n);
  std::vector<std::size_t> where(n);
  std::vector<std::size_t> block_of(n);
  std::vector<std::size_t> first, last, marked_end;

  {
    std::size_t pos = 0;
    for (bool acc : {true, false}) {
      const std::size_t begin = pos;
      for (StateId q = 0; q < n; ++q) {
        if (dfa.accepting(q) == acc) {
          elems[pos] = q;
          where[q] = pos;
          block_of[q] = first.size();
          ++pos;
        }
      }
      if (pos > begin) {
        first.push_back(begin);
        last.push_back(pos);
        marked_end.push_back(begin);
      }
    }
  }

  // Splitters are (block, symbol) pairs encoded as block*k+symbol.
  std::vector<std::size_t> work;
  {
    std::size_t seed_block = 0;
    if (first.size() == 2 &&
        last[1] - first[1] < last[0] - first[0]) {
      seed_block = 1;
    }
    for (Symbol p = 0; p < k; ++p) work.push_back(seed_block * k + p);
  }
  std::vector<bool> splitter_pending(first.size() * k, false);
  for (std::size_t w : work) splitter_pending[w] = true;

  std::vector<std::size_t> touched;
  std::vector<StateId> splitter_states;
  while (!work.empty()) {
    const std::size_t w = work.back();
    work.pop_back();
    splitter_pending[w] = false;
    const std::size_t a = w / k;
    const auto sym = static_cast<Symbol>(w % k);

    splitter_states.assign(elems.begin() + first[a], elems.begin() + last[a]);
    touched.clear();
    for (StateId s : splitter_states) {
      for (std::size_t i = inv_start[s * k + sym]; i < inv_start[s * k + sym + 1];
           ++i) {
        const StateId q = inv[i];
        const std::size_t b = block_of[q];
        const std::size_t pos = where[q];
        if (pos < marked_end[b]) continue;  // already marked
        if (marked_end[b] == first[b]) touched.push_back(b);
        // Swap q into the marked prefix of its block.
        const std::size_t dst = marked_end[b]++;
        const StateId other = elems[dst];
        std::swap(elems[pos], elems[dst]);
        where[other] = pos;
        where[q] = dst;
      }
    }

    for (std::size_t b : touched) {
      const std::size_t mid = marked_end[b];
      if (mid == last[b]) {
        marked_end[b] = first[b];
        continue;
      }
      // Split b into [first, mid) (marked) and [mid, last).
      const std::size_t nb = first.size();
      first.push_back(mid);
      last.push_back(last[b]);
      marked_end.push_back(mid);
      last[b] = mid;
      marked_end[b] = first[b];
      for (std::size_t i = first[nb]; i < last[nb]; ++i) block_of[elems[i]] = nb;
      splitter_pending.resize(first.size() * k, false);

      const std::size_t size_b = last[b] - first[b];
      const std::size_t size_nb = last[nb] - first[nb];
      for (Symbol p = 0; p < k; ++p) {
        if (splitter_pending[b * k + p]) {
          splitter_pending[nb * k + p] = true;
          work.push_back(nb * k + p);
        } else {
          const std::size_t smaller = size_nb < size_b ? nb : b;
          splitter_pending[smaller * k + p] = true;
          work.push_back(smaller * k + p);
        }
      }
    }
  }

  // Quotient automaton, then BFS renumbering from the initial block.
  const std::size_t num_blocks = first.size();
  Dfa quotient(dfa.alphabet(), num_blocks);
  for (std::size_t b = 0; b < num_blocks; ++b) {
    const StateId rep = elems[first[b]];
    for (Symbol p = 0; p < k; ++p) {
      quotient.set_transition(static_cast<StateId>(b), p,
                              static_cast<StateId>(block_of[dfa.next(rep, p)]));
    }
    quotient.set_accepting(static_cast<StateId>(b), dfa.accepting(rep));
  }
  const auto init_block = static_cast<StateId>(block_of[Dfa::initial()]);
  return trim_unreachable(swap_states(quotient, 0, init_block));
}

bool dfa_equivalent(const Dfa& a, const Dfa& b) {
  if (a.num_symbols() != b.num_symbols()) {
    throw InputError("cannot compare DFAs over alphabets of different size");
  }
  const std::size_t nb = b.num_states();
  std::vector<bool> seen(a.num_states() * nb, false);
  std::deque<std::pair<StateId, StateId>> queue{{Dfa::initial(), Dfa::initial()}};
  seen[0] = true;
  while (!queue.empty()) {
    auto [qa, qb] = queue.front();
    queue.pop_front();
    if (a.accepting(qa) != b.accepting(qb)) return false;
    for (Symbol p = 0; p < a.num_symbols(); ++p) {
      const StateId ra = a.next(qa, p);
      const StateId rb = b.next(qb, p);
      const std::size_t key = static_cast<std::size_t>(ra) * nb + rb;
      if (!seen[key]) {
        seen[key] = true;
        queue.emplace_back(ra, rb);
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Random generation

Dfa random_dfa(std::size_t num_states, const Alphabet& alphabet,
               std::uint64_t seed) {
  if (num_states == 0) throw InputError("num_states must be at least 1");
  std::mt19937_64 rng(seed);
  const std::size_t k = alphabet.size();

  std::vector<bool> accepting(num_states);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t q = 0; q < num_states; ++q) accepting[q] = coin(rng);

  std::vector<std::vector<StateId>> delta(num_states,
                                          std::vector<StateId>(k, kUnset));
  // Reachability skeleton: state j gets one incoming edge from an earlier
  // state on a still-empty cell. Earlier states always have a free cell
  // since j-1 states own (j-1)*k cells and only j-2 are used.
  std::uniform_int_distribution<Symbol> pick_symbol(0, static_cast<Symbol>(k - 1));
  for (StateId j = 1; j < num_states; ++j) {
    std::uniform_int_distribution<StateId> pick_source(0, j - 1);
    for (;;) {
      const StateId src = pick_source(rng);
      const Symbol p = pick_symbol(rng);
      if (delta[src][p] == kUnset) {
        delta[src][p] = j;
        break;
      }
    }
  }
  std::uniform_int_distribution<StateId> pick_target(
      0, static_cast<StateId>(num_states - 1));
  for (auto& row : delta) {
    for (auto& cell : row) {
      if (cell == kUnset) cell = pick_target(rng);
    }
  }
  return Dfa(alphabet, delta, std::move(accepting));
}

// ---------------------------------------------------------------------------
// Serialization

std::string export_dot(const Dfa& dfa) {
  std::ostringstream out;
  out << "digraph dfa {\n";
  out << "  rankdir=LR;\n";
  for (StateId q = 0; q < dfa.num_states(); ++q) {
    out << "  q" << q << " [label=\"" << q << "\", shape="
        << (dfa.accepting(q) ? "doublecircle" : "circle");
    if (q == Dfa::initial()) out << ", style=bold";
    out << "];\n";
  }
  for (StateId q = 0; q < dfa.num_states(); ++q) {
    for (Symbol p = 0; p < dfa.num_symbols(); ++p) {
      out << "  q" << q << " -> q" << dfa.next(q, p) << " [label=\""
          << dfa.alphabet().name(p) << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

nlohmann::json dfa_to_json(const Dfa& dfa) {
  nlohmann::json delta = nlohmann::json::array();
  for (StateId q = 0; q < dfa.num_states(); ++q) {
    nlohmann::json row = nlohmann::json::array();
    for (Symbol p = 0; p < dfa.num_symbols(); ++p) row.push_back(dfa.next(q, p));
    delta.push_back(std::move(row));
  }
  nlohmann::json accepting = nlohmann::json::array();
  for (StateId q = 0; q < dfa.num_states(); ++q) {
    accepting.push_back(static_cast<bool>(dfa.accepting(q)));
  }
  return {{"alphabet", dfa.alphabet().names()},
          {"num_states", dfa.num_states()},
          {"initial", Dfa::initial()},
          {"delta", std::move(delta)},
          {"accepting", std::move(accepting)}};
}

namespace {

bool is_index(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

}  // namespace

Dfa dfa_from_json(const nlohmann::json& doc) {
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!doc.is_object() || !doc.contains(name)) {
      throw ParseError(std::string("missing field \"") + name + "\"");
    }
    return doc.at(name);
  };
  try {
    const auto& alpha = field("alphabet");
    if (!alpha.is_array() || alpha.empty()) {
      throw ParseError("field \"alphabet\" must be a nonempty array");
    }
    std::vector<std::string> names;
    for (const auto& s : alpha) {
      if (!s.is_string()) throw ParseError("field \"alphabet\" must hold strings");
      names.push_back(s.get<std::string>());
    }
    const auto& ns = field("num_states");
    if (!is_index(ns) || ns.get<std::size_t>() == 0) {
      throw ParseError("field \"num_states\" must be a positive integer");
    }
    const auto n = ns.get<std::size_t>();
    const auto& init = field("initial");
    if (!is_index(init)) {
      throw ParseError("field \"initial\" must be a state index");
    }
    const auto initial = init.get<std::size_t>();
    if (initial >= n) throw ParseError("field \"initial\": state out of range");

    const auto& delta_doc = field("delta");
    if (!delta_doc.is_array() || delta_doc.size() != n) {
      throw ParseError("field \"delta\" must have num_states rows");
    }
    std::vector<std::vector<StateId>> delta;
    for (const auto& row : delta_doc) {
      if (!row.is_array() || row.size() != names.size()) {
        throw ParseError("field \"delta\": row length must equal alphabet size");
      }
      std::vector<StateId> r;
      for (const auto& cell : row) {
        if (!is_index(cell)) {
          throw ParseError("field \"delta\": entries must be state indices");
        }
        if (cell.get<std::size_t>() >= n) {
          throw ParseError("field \"delta\": transition target out of range");
        }
        r.push_back(cell.get<StateId>());
      }
      delta.push_back(std::move(r));
    }
    const auto& acc_doc = field("accepting");
    if (!acc_doc.is_array() || acc_doc.size() != n) {
      throw ParseError("field \"accepting\" must have num_states booleans");
    }
    std::vector<bool> accepting;
    for (const auto& a : acc_doc) {
      if (!a.is_boolean()) throw ParseError("field \"accepting\" must hold booleans");
      accepting.push_back(a.get<bool>());
    }
    Dfa dfa(Alphabet(std::move(names)), delta, std::move(accepting));
    return swap_states(dfa, 0, static_cast<StateId>(initial));
  } catch (const InputError& e) {
    throw ParseError(e.what());
  }
}

std::string dfa_to_json_text(const Dfa& dfa) {
  return dfa_to_json(dfa).dump(2) + "\n";
}

Dfa dfa_from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return dfa_from_json(doc);
}

}  // namespace deepdfa
