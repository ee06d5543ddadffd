// SPDX-License-Identifier: Apache-2.0
#include "deepdfa/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "deepdfa/errors.hpp"

namespace deepdfa {

namespace {

constexpr double kBeliefSumTol = 1e-6;
constexpr std::size_t kAttemptsPerSample = 500;

std::vector<Symbol> random_string(std::mt19937_64& rng, std::size_t length,
                                  std::size_t alphabet_size) {
  std::uniform_int_distribution<Symbol> pick(
      0, static_cast<Symbol>(alphabet_size - 1));
  std::vector<Symbol> s(length);
  for (auto& c : s) c = pick(rng);
  return s;
}

std::string key_of(const std::vector<Symbol>& s) {
  return {reinterpret_cast<const char*>(s.data()), s.size() * sizeof(Symbol)};
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TraceSample TraceSample::crisp(std::vector<Symbol> symbols, int label) {
  TraceSample s;
  s.mode = TraceMode::kCrisp;
  s.symbols = std::move(symbols);
  s.label = label;
  return s;
}

TraceSample TraceSample::belief(std::vector<std::vector<double>> beliefs,
                                int label) {
  TraceSample s;
  s.mode = TraceMode::kBelief;
  s.beliefs = std::move(beliefs);
  s.label = label;
  return s;
}

Samples sample_balanced_train(const MembershipOracle& oracle,
                              std::size_t alphabet_size, std::size_t len_max,
                              std::size_t target_size, std::uint64_t seed) {
  if (len_max == 0) throw InputError("len_max must be at least 1");
  if (alphabet_size == 0) throw InputError("alphabet size must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_len(1, len_max);

  const std::array<std::size_t, 2> quota{target_size / 2,
                                         target_size - target_size / 2};
  std::array<std::size_t, 2> have{0, 0};
  std::array<std::size_t, 2> seen_class{0, 0};
  std::unordered_set<std::string> seen;
  Samples out;
  out.reserve(target_size);

  auto full = [&] { return have[0] >= quota[0] && have[1] >= quota[1]; };
  const std::size_t budget = kAttemptsPerSample * std::max<std::size_t>(target_size, 1);

  // Distinct strings first.
  for (std::size_t attempt = 0; attempt < budget && !full(); ++attempt) {
    auto s = random_string(rng, pick_len(rng), alphabet_size);
    if (!seen.insert(key_of(s)).second) continue;
    const int label = oracle(s) ? 1 : 0;
    ++seen_class[label];
    if (have[label] < quota[label]) {
      ++have[label];
      out.push_back(TraceSample::crisp(std::move(s), label));
    }
  }
  for (int c = 0; c < 2; ++c) {
    if (have[c] < quota[c] && seen_class[c] == 0) {
      throw GenerationError(std::string("class starvation: no ") +
                            (c == 1 ? "positive" : "negative") +
                            " strings found with length <= " +
                            std::to_string(len_max));
    }
  }
  // Top up a class whose distinct strings ran out, allowing repeats.
  for (std::size_t attempt = 0; attempt < budget && !full(); ++attempt) {
    auto s = random_string(rng, pick_len(rng), alphabet_size);
    const int label = oracle(s) ? 1 : 0;
    if (have[label] < quota[label]) {
      ++have[label];
      out.push_back(TraceSample::crisp(std::move(s), label));
    }
  }
  if (!full()) {
    const bool pos_starved = have[1] < quota[1];
    throw GenerationError(std::string("class starvation: could not fill the ") +
                          (pos_starved ? "positive" : "negative") + " class");
  }
  return out;
}

Samples sample_fixed_length(const MembershipOracle& oracle,
                            std::size_t alphabet_size, std::size_t length,
                            std::size_t size, std::uint64_t seed) {
  if (alphabet_size == 0) throw InputError("alphabet size must be at least 1");
  std::mt19937_64 rng(seed);
  Samples out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    auto s = random_string(rng, length, alphabet_size);
    const int label = oracle(s) ? 1 : 0;
    out.push_back(TraceSample::crisp(std::move(s), label));
  }
  return out;
}

Samples flip_labels(const Samples& samples, double fraction,
                    std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw InputError("flip fraction must lie in [0, 1]");
  }
  Samples out = samples;
  const auto count = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(out.size()) + 1e-9));
  std::vector<std::size_t> idx(out.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` entries are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out[idx[i]].label = 1 - out[idx[i]].label;
  }
  return out;
}

Samples corrupt_symbols_gaussian(const Samples& samples,
                                 std::size_t alphabet_size, double variance,
                                 std::uint64_t seed,
                                 SimplexProjection projection) {
  if (!(variance >= 0.0)) throw InputError("variance must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(variance));
  Samples out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.mode != TraceMode::kCrisp) {
      throw InputError("symbol corruption expects crisp traces");
    }
    std::vector<std::vector<double>> beliefs;
    beliefs.reserve(s.symbols.size());
    for (Symbol c : s.symbols) {
      if (c >= alphabet_size) throw InputError("symbol out of range");
      std::vector<double> v(alphabet_size, 0.0);
      v[c] = 1.0;
      if (variance > 0.0) {
        for (auto& x : v) x += noise(rng);
      }
      if (projection == SimplexProjection::kClampRenormalize) {
        double sum = 0.0;
        for (auto& x : v) {
          x = std::max(x, 0.0);
          sum += x;
        }
        if (sum > 0.0) {
          for (auto& x : v) x /= sum;
        } else {
          std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(alphabet_size));
        }
      }
      beliefs.push_back(std::move(v));
    }
    out.push_back(TraceSample::belief(std::move(beliefs), s.label));
  }
  return out;
}

Symbol nearest_one_hot(std::span<const double> belief) {
  if (belief.empty()) throw InputError("empty belief vector");
  return static_cast<Symbol>(std::max_element(belief.begin(), belief.end()) -
                             belief.begin());
}

Samples discretize(const Samples& samples) {
  Samples out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.mode == TraceMode::kCrisp) {
      out.push_back(s);
      continue;
    }
    std::vector<Symbol> symbols;
    symbols.reserve(s.beliefs.size());
    for (const auto& b : s.beliefs) symbols.push_back(nearest_one_hot(b));
    out.push_back(TraceSample::crisp(std::move(symbols), s.label));
  }
  return out;
}

void validate_sample(const TraceSample& sample, std::size_t alphabet_size) {
  if (sample.label != 0 && sample.label != 1) {
    throw InputError("label must be 0 or 1");
  }
  if (sample.mode == TraceMode::kCrisp) {
    for (Symbol c : sample.symbols) {
      if (c >= alphabet_size) throw InputError("symbol out of range");
    }
    return;
  }
  for (const auto& b : sample.beliefs) {
    if (b.size() != alphabet_size) {
      throw InputError("belief vector length does not match the alphabet");
    }
    double sum = 0.0;
    for (double x : b) {
      if (!(x >= 0.0)) throw InputError("belief vector has a negative entry");
      sum += x;
    }
    if (std::abs(sum - 1.0) > kBeliefSumTol) {
      throw InputError("belief vector does not sum to 1");
    }
  }
}

std::string sample_to_jsonl(const TraceSample& sample) {
  std::string line;
  if (sample.mode == TraceMode::kCrisp) {
    line = "{\"symbols\":[";
    for (std::size_t i = 0; i < sample.symbols.size(); ++i) {
      if (i) line += ',';
      line += std::to_string(sample.symbols[i]);
    }
    line += "]";
  } else {
    line = "{\"beliefs\":[";
    for (std::size_t i = 0; i < sample.beliefs.size(); ++i) {
      if (i) line += ',';
      line += '[';
      for (std::size_t j = 0; j < sample.beliefs[i].size(); ++j) {
        if (j) line += ',';
        line += format_real(sample.beliefs[i][j]);
      }
      line += ']';
    }
    line += "]";
  }
  line += ",\"label\":" + std::to_string(sample.label) + "}";
  return line;
}

void write_jsonl(std::ostream& out, const Samples& samples) {
  for (const auto& s : samples) out << sample_to_jsonl(s) << '\n';
}

Samples read_jsonl(std::istream& in) {
  Samples out;
  std::string line;
  std::size_t line_no = 0;
  bool have_mode = false;
  TraceMode file_mode = TraceMode::kCrisp;
  auto fail = [&](const std::string& msg) {
    throw ParseError("line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      fail("malformed JSON");
    }
    if (!doc.is_object()) fail("expected an object");
    if (!doc.contains("label") || !doc["label"].is_number_integer()) {
      fail("missing integer \"label\"");
    }
    const int label = doc["label"].get<int>();
    if (label != 0 && label != 1) fail("label must be 0 or 1");
    const bool crisp = doc.contains("symbols");
    const bool belief = doc.contains("beliefs");
    if (crisp == belief) fail("expected exactly one of \"symbols\" or \"beliefs\"");
    const TraceMode mode = crisp ? TraceMode::kCrisp : TraceMode::kBelief;
    if (have_mode && mode != file_mode) fail("mixed crisp and belief samples");
    have_mode = true;
    file_mode = mode;
    try {
      if (crisp) {
        const auto& arr = doc["symbols"];
        if (!arr.is_array()) fail("\"symbols\" must be an array");
        std::vector<Symbol> symbols;
        for (const auto& v : arr) {
          if (!v.is_number_unsigned()) fail("symbols must be non-negative integers");
          symbols.push_back(v.get<Symbol>());
        }
        out.push_back(TraceSample::crisp(std::move(symbols), label));
      } else {
        const auto& arr = doc["beliefs"];
        if (!arr.is_array()) fail("\"beliefs\" must be an array");
        std::vector<std::vector<double>> beliefs;
        for (const auto& row : arr) {
          if (!row.is_array()) fail("each belief must be an array");
          std::vector<double> b;
          for (const auto& v : row) {
            if (!v.is_number()) fail("belief entries must be numbers");
            b.push_back(v.get<double>());
          }
          beliefs.push_back(std::move(b));
        }
        out.push_back(TraceSample::belief(std::move(beliefs), label));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
  }
  return out;
}

void save_jsonl(const std::string& path, const Samples& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  write_jsonl(out, samples);
}

Samples load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return read_jsonl(in);
}

std::size_t count_positive(const Samples& samples) {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(),
      [](const TraceSample& s) { return s.label == 1; }));
}

}  // namespace deepdfa
