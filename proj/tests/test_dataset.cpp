// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "deepdfa/dataset.hpp"
#include "deepdfa/errors.hpp"
#include "deepdfa/tomita.hpp"

namespace deepdfa {
namespace {

MembershipOracle tomita_oracle(int k) {
  const tomita::TomitaId id(k);
  return [id](std::span<const Symbol> s) { return tomita::accepts(id, s); };
}

std::size_t count_differences(const Samples& a, const Samples& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i].label != b[i].label;
  return n;
}

Samples numbered(std::size_t n) {
  Samples out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(TraceSample::crisp({static_cast<Symbol>(i % 2)}, static_cast<int>(i % 2)));
  }
  return out;
}

TEST(SampleBalancedTrain, TomitaSizesBalanceAndLengths) {
  const std::size_t sizes[] = {325, 315, 2701, 3373, 1991, 3423, 1741};
  for (int k = 1; k <= 7; ++k) {
    const std::size_t n = sizes[k - 1];
    const Samples s = sample_balanced_train(tomita_oracle(k), 2, 30, n, 11);
    ASSERT_EQ(s.size(), n);
    const auto pos = static_cast<double>(count_positive(s));
    const auto neg = static_cast<double>(n) - pos;
    EXPECT_LE(std::abs(pos - neg), std::max(1.0, 0.02 * static_cast<double>(n)));
    for (const auto& t : s) {
      EXPECT_GE(t.length(), 1u);
      EXPECT_LE(t.length(), 30u);
      EXPECT_EQ(t.label, tomita::accepts(tomita::TomitaId(k), t.symbols) ? 1 : 0);
    }
  }
}

TEST(SampleBalancedTrain, DistinctWhileTheClassHasFreshStrings) {
  const Samples s = sample_balanced_train(tomita_oracle(4), 2, 30, 3373, 3);
  std::set<std::vector<Symbol>> unique;
  for (const auto& t : s) unique.insert(t.symbols);
  EXPECT_EQ(unique.size(), s.size());
}

TEST(SampleBalancedTrain, StarvedClassIsNamed) {
  const MembershipOracle all = [](std::span<const Symbol>) { return true; };
  try {
    sample_balanced_train(all, 2, 10, 50, 1);
    FAIL() << "expected GenerationError";
  } catch (const GenerationError& e) {
    EXPECT_NE(std::string(e.what()).find("negative"), std::string::npos);
  }
}

TEST(SampleBalancedTrain, Deterministic) {
  EXPECT_EQ(sample_balanced_train(tomita_oracle(3), 2, 30, 500, 9),
            sample_balanced_train(tomita_oracle(3), 2, 30, 500, 9));
  EXPECT_NE(sample_balanced_train(tomita_oracle(3), 2, 30, 500, 9),
            sample_balanced_train(tomita_oracle(3), 2, 30, 500, 10));
}

TEST(SampleFixedLength, LengthsAndLabels) {
  const Samples s = sample_fixed_length(tomita_oracle(5), 2, 60, 300, 4);
  ASSERT_EQ(s.size(), 300u);
  for (const auto& t : s) {
    EXPECT_EQ(t.length(), 60u);
    EXPECT_EQ(t.label, tomita::accepts(tomita::TomitaId(5), t.symbols) ? 1 : 0);
  }
  EXPECT_NE(s, sample_fixed_length(tomita_oracle(5), 2, 60, 300, 5));
}

TEST(SampleFixedLength, EmptyString) {
  const Samples s = sample_fixed_length(tomita_oracle(5), 2, 0, 1, 4);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].length(), 0u);
  EXPECT_EQ(s[0].label, 1);
}

TEST(FlipLabels, ExactCounts) {
  const Samples base = numbered(1000);
  EXPECT_EQ(flip_labels(base, 0.0, 1), base);
  EXPECT_EQ(count_differences(base, flip_labels(base, 0.01, 1)), 10u);
  EXPECT_EQ(count_differences(base, flip_labels(base, 0.29, 1)), 290u);
  const Samples all = flip_labels(base, 1.0, 1);
  EXPECT_EQ(count_differences(base, all), 1000u);
  EXPECT_THROW(flip_labels(base, 1.5, 1), InputError);
}

TEST(FlipLabels, OriginalUntouchedAndComposes) {
  const Samples base = numbered(500);
  const Samples copy = base;
  const Samples a = flip_labels(base, 0.1, 1);
  EXPECT_EQ(base, copy);
  const Samples ab = flip_labels(a, 0.04, 2);
  const std::size_t d = count_differences(base, ab);
  EXPECT_GE(d, 50u - 20u);
  EXPECT_LE(d, 50u + 20u);
}

TEST(CorruptSymbols, ZeroVarianceIsOneHot) {
  const Samples crisp = {TraceSample::crisp({0, 1, 2, 1}, 1)};
  const Samples b = corrupt_symbols_gaussian(crisp, 3, 0.0, 1);
  ASSERT_EQ(b[0].mode, TraceMode::kBelief);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t p = 0; p < 3; ++p) {
      EXPECT_EQ(b[0].beliefs[t][p], p == crisp[0].symbols[t] ? 1.0 : 0.0);
    }
  }
  EXPECT_EQ(discretize(b), crisp);
}

TEST(CorruptSymbols, ProjectionStaysOnTheSimplex) {
  const Samples crisp = sample_fixed_length(tomita_oracle(4), 2, 40, 200, 1);
  for (double variance : {0.2, 1.0, 5.0}) {
    const Samples b = corrupt_symbols_gaussian(crisp, 2, variance, 8);
    for (std::size_t i = 0; i < b.size(); ++i) {
      EXPECT_EQ(b[i].label, crisp[i].label);
      for (const auto& v : b[i].beliefs) {
        double sum = 0.0;
        for (double x : v) {
          EXPECT_GE(x, 0.0);
          sum += x;
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
      }
      EXPECT_NO_THROW(validate_sample(b[i], 2));
    }
  }
}

TEST(CorruptSymbols, RawModeKeepsNegativeEntries) {
  const Samples crisp = sample_fixed_length(tomita_oracle(4), 2, 40, 50, 1);
  const Samples b = corrupt_symbols_gaussian(crisp, 2, 0.5, 8, SimplexProjection::kNone);
  bool negative = false;
  for (const auto& s : b) {
    for (const auto& v : s.beliefs) negative |= v[0] < 0.0 || v[1] < 0.0;
  }
  EXPECT_TRUE(negative);
}

TEST(CorruptSymbols, SmallVarianceRarelyChangesTheNearestSymbol) {
  Samples crisp;
  std::vector<Symbol> symbols;
  for (int i = 0; i < 1000; ++i) symbols.push_back(static_cast<Symbol>(i % 2));
  for (int i = 0; i < 100; ++i) crisp.push_back(TraceSample::crisp(symbols, 0));
  const Samples b = corrupt_symbols_gaussian(crisp, 2, 0.01, 3);
  std::size_t same = 0, total = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t t = 0; t < symbols.size(); ++t) {
      same += nearest_one_hot(b[i].beliefs[t]) == symbols[t];
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(same) / static_cast<double>(total), 0.999);
}

TEST(CorruptSymbols, Deterministic) {
  const Samples crisp = sample_fixed_length(tomita_oracle(4), 2, 10, 10, 1);
  EXPECT_EQ(corrupt_symbols_gaussian(crisp, 2, 0.3, 5),
            corrupt_symbols_gaussian(crisp, 2, 0.3, 5));
}

TEST(NearestOneHot, TieBreak) {
  EXPECT_EQ(nearest_one_hot(std::vector<double>{1.0, 0.0}), 0u);
  EXPECT_EQ(nearest_one_hot(std::vector<double>{0.4, 0.6}), 1u);
  EXPECT_EQ(nearest_one_hot(std::vector<double>{0.5, 0.5}), 0u);
}

TEST(ValidateSample, Invariants) {
  EXPECT_THROW(validate_sample(TraceSample::crisp({0, 2}, 1), 2), InputError);
  EXPECT_THROW(validate_sample(TraceSample::crisp({0}, 2), 2), InputError);
  EXPECT_THROW(validate_sample(TraceSample::belief({{0.5, 0.6}}, 1), 2), InputError);
  EXPECT_THROW(validate_sample(TraceSample::belief({{1.2, -0.2}}, 1), 2), InputError);
  EXPECT_THROW(validate_sample(TraceSample::belief({{1.0}}, 1), 2), InputError);
  EXPECT_NO_THROW(validate_sample(TraceSample::belief({{0.3, 0.7}}, 1), 2));
}

TEST(Jsonl, RoundTripCrispAndBelief) {
  const Samples crisp = sample_fixed_length(tomita_oracle(2), 2, 7, 20, 1);
  std::stringstream a;
  write_jsonl(a, crisp);
  EXPECT_EQ(read_jsonl(a), crisp);

  const Samples belief = corrupt_symbols_gaussian(crisp, 2, 0.3, 2);
  std::stringstream b;
  write_jsonl(b, belief);
  EXPECT_EQ(read_jsonl(b), belief);  // 17 significant digits round-trip exactly
}

TEST(Jsonl, EmptyInput) {
  std::stringstream empty;
  EXPECT_TRUE(read_jsonl(empty).empty());
}

TEST(Jsonl, ErrorsCarryLineNumbers) {
  auto message = [](const std::string& text) {
    std::stringstream in(text);
    try {
      read_jsonl(in);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_EQ(message("{\"symbols\":[0],\"label\":1}\n{\"beliefs\":[[1,0]],\"label\":0}\n")
                .rfind("line 2:", 0),
            0u);
  EXPECT_EQ(message("{\"symbols\":[0],\"label\":1}\n{oops\n").rfind("line 2:", 0), 0u);
  EXPECT_EQ(message("{\"symbols\":[0]}\n").rfind("line 1:", 0), 0u);
  EXPECT_EQ(message("{\"symbols\":[-1],\"label\":0}\n").rfind("line 1:", 0), 0u);
  EXPECT_EQ(message("{\"symbols\":[0],\"label\":3}\n").rfind("line 1:", 0), 0u);
}

}  // namespace
}  // namespace deepdfa
