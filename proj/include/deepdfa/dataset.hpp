// SPDX-License-Identifier: Apache-2.0
//
// Labeled trace sampling, label and symbol corruption, and JSON-lines I/O.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepdfa/automata.hpp"

namespace deepdfa {

enum class TraceMode { kCrisp, kBelief };

/// One labeled trace. Crisp traces carry symbol indices; belief traces carry
/// one probability vector over the alphabet per step.
struct TraceSample {
  TraceMode mode = TraceMode::kCrisp;
  std::vector<Symbol> symbols;
  std::vector<std::vector<double>> beliefs;
  int label = 0;

  static TraceSample crisp(std::vector<Symbol> symbols, int label);
  static TraceSample belief(std::vector<std::vector<double>> beliefs, int label);

  std::size_t length() const noexcept {
    return mode == TraceMode::kCrisp ? symbols.size() : beliefs.size();
  }
  bool operator==(const TraceSample&) const = default;
};

using Samples = std::vector<TraceSample>;
using MembershipOracle = std::function<bool(std::span<const Symbol>)>;

struct DatasetBundle {
  Samples train;
  Samples dev;
  Samples test;
  /// Seed, length ranges, target description and applied noise.
  nlohmann::json metadata = nlohmann::json::object();
};

/// Uniform length in [1, len_max], uniform symbols, class-aware rejection
/// until |#pos - #neg| <= 1 with target_size samples in total. Strings are
/// deduplicated while possible; a class whose distinct strings run out is
/// topped up with repeats. Throws GenerationError if a class is never seen
/// within 500 * target_size draws.
Samples sample_balanced_train(const MembershipOracle& oracle,
                              std::size_t alphabet_size, std::size_t len_max,
                              std::size_t target_size, std::uint64_t seed);

/// Uniform strings of exactly `length` symbols.
Samples sample_fixed_length(const MembershipOracle& oracle,
                            std::size_t alphabet_size, std::size_t length,
                            std::size_t size, std::uint64_t seed);

/// Flips floor(fraction * N) labels at distinct uniformly chosen positions.
Samples flip_labels(const Samples& samples, double fraction, std::uint64_t seed);

enum class SimplexProjection {
  kClampRenormalize,  // clamp negatives to 0, renormalize, uniform if all 0
  kNone,              // raw noisy vectors
};

/// One-hot encodes each symbol and adds N(0, variance) noise per entry.
Samples corrupt_symbols_gaussian(
    const Samples& samples, std::size_t alphabet_size, double variance,
    std::uint64_t seed,
    SimplexProjection projection = SimplexProjection::kClampRenormalize);

/// Argmax, lowest index on ties.
Symbol nearest_one_hot(std::span<const double> belief);

/// Belief traces become crisp traces via nearest_one_hot.
Samples discretize(const Samples& samples);

/// Throws InputError if a sample violates its mode's invariants.
void validate_sample(const TraceSample& sample, std::size_t alphabet_size);

std::string sample_to_jsonl(const TraceSample& sample);
void write_jsonl(std::ostream& out, const Samples& samples);
/// Throws ParseError("line N: ...") on malformed input or mixed modes.
Samples read_jsonl(std::istream& in);

void save_jsonl(const std::string& path, const Samples& samples);
Samples load_jsonl(const std::string& path);

std::size_t count_positive(const Samples& samples);

}  // namespace deepdfa
