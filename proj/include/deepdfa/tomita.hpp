// SPDX-License-Identifier: Apache-2.0
//
// The seven Tomita languages over {a, b}, with a read as '0' and b as '1'.
#pragma once

#include <span>

#include "deepdfa/automata.hpp"

namespace deepdfa::tomita {

/// Language index 1..7.
class TomitaId {
 public:
  explicit TomitaId(int index);
  int index() const noexcept { return index_; }

 private:
  int index_;
};

inline constexpr int kNumLanguages = 7;

/// Direct membership test from the language definition (no automaton).
/// Throws InputError on a non-binary symbol.
bool accepts(TomitaId id, std::span<const Symbol> trace);

/// Explicit minimal complete DFA.
Dfa dfa(TomitaId id);

/// State count of the minimal DFA for each language.
std::size_t minimal_size(TomitaId id);

const Alphabet& binary_alphabet();

}  // namespace deepdfa::tomita
