// SPDX-License-Identifier: Apache-2.0
#include "deepdfa/tomita.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "deepdfa/errors.hpp"

namespace deepdfa::tomita {

namespace {

// Maximal runs of equal symbols as (symbol, length).
std::vector<std::pair<Symbol, std::size_t>> blocks(std::span<const Symbol> s) {
  std::vector<std::pair<Symbol, std::size_t>> out;
  for (Symbol c : s) {
    if (!out.empty() && out.back().first == c) {
      ++out.back().second;
    } else {
      out.emplace_back(c, 1);
    }
  }
  return out;
}

Dfa make(std::vector<std::vector<StateId>> delta, std::vector<bool> accepting) {
  return Dfa(binary_alphabet(), delta, std::move(accepting));
}

}  // namespace

TomitaId::TomitaId(int index) : index_(index) {
  if (index < 1 || index > kNumLanguages) {
    throw InputError("Tomita index must be in 1..7, got " +
                     std::to_string(index));
  }
}

const Alphabet& binary_alphabet() {
  static const Alphabet alphabet(std::vector<std::string>{"a", "b"});
  return alphabet;
}

bool accepts(TomitaId id, std::span<const Symbol> trace) {
  std::size_t zeros = 0;
  std::size_t ones = 0;
  for (Symbol c : trace) {
    if (c > 1) {
      throw InputError("Tomita languages are binary; got symbol " +
                       std::to_string(c));
    }
    (c == 0 ? zeros : ones) += 1;
  }
  switch (id.index()) {
    case 1:  // 1*
      return zeros == 0;
    case 2: {  // (10)*
      if (trace.size() % 2 != 0) return false;
      for (std::size_t i = 0; i < trace.size(); ++i) {
        if (trace[i] != (i % 2 == 0 ? 1u : 0u)) return false;
      }
      return true;
    }
    case 3: {  // no odd run of 1s directly followed by an odd run of 0s
      const auto runs = blocks(trace);
      for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
        if (runs[i].first == 1 && runs[i].second % 2 == 1 &&
            runs[i + 1].second % 2 == 1) {
          return false;
        }
      }
      return true;
    }
    case 4: {  // no 000
      for (const auto& [c, len] : blocks(trace)) {
        if (c == 0 && len >= 3) return false;
      }
      return true;
    }
    case 5:
      return zeros % 2 == 0 && ones % 2 == 0;
    case 6:
      return (ones + 3 * trace.size() - zeros) % 3 == 0;
    case 7: {  // 0*1*0*1*
      const auto runs = blocks(trace);
      if (runs.empty()) return true;
      return runs.size() <= (runs.front().first == 0 ? 4u : 3u);
    }
  }
  return false;
}

Dfa dfa(TomitaId id) {
  // Rows are indexed by state; columns are (a='0', b='1').
  switch (id.index()) {
    case 1:
      return make({{1, 0}, {1, 1}}, {true, false});
    case 2:
      return make({{2, 1}, {0, 2}, {2, 2}}, {true, false, false});
    case 3:
      // 0 clean, 1 odd run of 1s, 2 odd 0s after an odd run of 1s,
      // 3 even 0s after an odd run of 1s, 4 dead.
      return make({{0, 1}, {2, 0}, {3, 4}, {2, 1}, {4, 4}},
                  {true, true, false, true, false});
    case 4:
      // Number of trailing 0s, then dead.
      return make({{1, 0}, {2, 0}, {3, 0}, {3, 3}},
                  {true, true, true, false});
    case 5:
      // (parity of 0s, parity of 1s): 0=(e,e) 1=(o,e) 2=(e,o) 3=(o,o)
      return make({{1, 2}, {0, 3}, {3, 0}, {2, 1}},
                  {true, false, false, false});
    case 6:
      // (#1 - #0) mod 3
      return make({{2, 1}, {0, 2}, {1, 0}}, {true, false, false});
    case 7:
      // Phases of 0*1*0*1*, then dead.
      return make({{0, 1}, {2, 1}, {2, 3}, {4, 3}, {4, 4}},
                  {true, true, true, true, false});
  }
  throw InputError("unknown Tomita language");
}

std::size_t minimal_size(TomitaId id) {
  static constexpr std::array<std::size_t, kNumLanguages> kSizes{2, 3, 5, 4,
                                                                  4, 3, 5};
  return kSizes[static_cast<std::size_t>(id.index() - 1)];
}

}  // namespace deepdfa::tomita
