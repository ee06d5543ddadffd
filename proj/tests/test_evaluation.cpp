// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "deepdfa/errors.hpp"
#include "deepdfa/evaluation.hpp"
#include "deepdfa/tomita.hpp"
#include "oracles.hpp"

namespace deepdfa {
namespace {

// Argmax read off the activations at temperature tau, computed through
// softmax_with_temp and sigmoid_with_temp rather than on the logits.
Dfa argmax_of_activations(const ModelParams& p, double tau) {
  const std::size_t q = p.q_max();
  Dfa d(Alphabet(p.alphabet_size()), q);
  for (Symbol s = 0; s < p.alphabet_size(); ++s) {
    for (std::size_t r = 0; r < q; ++r) {
      const auto row = softmax_with_temp(p.transition_logits(s).subspan(r * q, q), tau);
      d.set_transition(static_cast<StateId>(r), s,
                       static_cast<StateId>(std::max_element(row.begin(), row.end()) -
                                            row.begin()));
    }
  }
  for (std::size_t r = 0; r < q; ++r) {
    d.set_accepting(static_cast<StateId>(r),
                    sigmoid_with_temp(p.output_logits()[r], tau) > 0.5);
  }
  return hopcroft_minimize(trim_unreachable(d));
}

RunReport report(double dev, std::size_t weights, std::size_t q_hat, std::uint64_t seed,
                 double test = 1.0) {
  RunReport r;
  r.dev_acc_dfa = dev;
  r.weights = weights;
  r.q_hat = q_hat;
  r.seed = seed;
  r.test_acc_dfa = test;
  r.seconds = static_cast<double>(seed);
  return r;
}

TEST(ExtractDfa, EmbeddedTomita3RoundTrips) {
  const Dfa t3 = tomita::dfa(tomita::TomitaId(3));
  const ModelParams p = testing::embed_dfa(t3, 10);
  const Dfa d = extract_dfa(p, tomita::binary_alphabet());
  EXPECT_EQ(d, t3);
  EXPECT_EQ(d.num_states(), 5u);
}

TEST(ExtractDfa, AllRejectingOutputsGiveOneState) {
  ModelParams p = ModelParams::random(2, 8, 3);
  for (auto& y : p.output_logits()) y = -std::abs(y) - 0.1;
  const Dfa d = extract_dfa(p);
  EXPECT_EQ(d.num_states(), 1u);
  EXPECT_FALSE(d.accepting(0));
}

TEST(ExtractDfa, ZeroLogitIsNotAccepting) {
  ModelParams p(1, 1);
  p.output_logits()[0] = 0.0;
  EXPECT_FALSE(extract_dfa(p).accepting(0));
}

TEST(ExtractDfa, TemperatureInvariance) {
  std::mt19937_64 rng(55);
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = 1 + rng() % 3;
    const ModelParams p = ModelParams::random(k, 1 + rng() % 10, rng(), 2.0);
    const Dfa base = extract_dfa(p);
    for (double tau : {1.0, 0.5, 1e-5}) EXPECT_EQ(argmax_of_activations(p, tau), base);
  }
}

TEST(ExtractDfa, MinimalityAgainstMyhillNerode) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const ModelParams p = ModelParams::random(2, 12, rng());
    const Dfa raw = argmax_dfa(p, Alphabet(2));
    const Dfa d = extract_dfa(p);
    EXPECT_EQ(d.num_states(), testing::myhill_nerode_size(raw));
    EXPECT_TRUE(dfa_equivalent(d, raw));
    EXPECT_EQ(extract_dfa(p, Alphabet(2), false), trim_unreachable(raw));
  }
}

TEST(WeightCount, TableValues) {
  EXPECT_EQ(weight_count(10, 2), 220u);
  EXPECT_EQ(weight_count(30, 2), 1860u);
  EXPECT_EQ(weight_count(100, 2), 20200u);
  EXPECT_EQ(weight_count(100, 3), 30200u);
  EXPECT_EQ(weight_count(200, 2), 80400u);
  EXPECT_EQ(weight_count(200, 3), 120400u);
}

TEST(Accuracy, Conventions) {
  const Dfa t1 = tomita::dfa(tomita::TomitaId(1));
  Samples s = {TraceSample::crisp({1, 1}, 1), TraceSample::crisp({0}, 0),
               TraceSample::crisp({1, 0}, 1)};
  EXPECT_NEAR(accuracy(t1, s).value, 2.0 / 3.0, 1e-15);
  for (auto& x : s) x.label = 1 - x.label;
  EXPECT_NEAR(accuracy(t1, s).value, 1.0 / 3.0, 1e-15);
  const Accuracy empty = accuracy(t1, Samples{});
  EXPECT_EQ(empty.value, 1.0);
  EXPECT_TRUE(empty.empty);
  const Samples beliefs = {TraceSample::belief({{0.2, 0.8}, {0.4, 0.6}}, 1),
                           TraceSample::belief({{0.6, 0.4}}, 0)};
  EXPECT_EQ(accuracy(t1, beliefs).value, 1.0);
}

TEST(Accuracy, ContinuousModelOnEmbeddedDfa) {
  const Dfa t4 = tomita::dfa(tomita::TomitaId(4));
  const ModelParams p = testing::embed_dfa(t4, 6);
  std::mt19937_64 rng(3);
  Samples s;
  for (int i = 0; i < 200; ++i) {
    const auto x = testing::random_trace(rng, 2, 20);
    s.push_back(TraceSample::crisp(x, dfa_accepts(t4, x) ? 1 : 0));
  }
  EXPECT_EQ(accuracy(p, 1.0, s).value, 1.0);
  EXPECT_THROW(accuracy_from_outputs(std::vector<double>{0.1}, s), InputError);
}

TEST(SelectBest, Rules) {
  EXPECT_THROW(select_best(std::vector<RunReport>{}), InputError);
  const std::vector<RunReport> one = {report(0.5, 220, 3, 1)};
  EXPECT_EQ(select_best(one).seed, 1u);
  const std::vector<RunReport> dev = {report(1.0, 1860, 3, 1), report(0.99, 220, 2, 2)};
  EXPECT_EQ(select_best(dev).seed, 1u);
  const std::vector<RunReport> weights = {report(1.0, 1860, 2, 1), report(1.0, 220, 3, 2)};
  EXPECT_EQ(select_best(weights).weights, 220u);
  const std::vector<RunReport> states = {report(1.0, 220, 4, 1), report(1.0, 220, 3, 2)};
  EXPECT_EQ(select_best(states).seed, 2u);
  const std::vector<RunReport> seeds = {report(1.0, 220, 3, 9), report(1.0, 220, 3, 4)};
  EXPECT_EQ(select_best(seeds).seed, 4u);
}

TEST(BestKOfN, HandComputed) {
  std::vector<RunReport> runs;
  // Dev accuracies 0.90..0.99 paired with test accuracies; the top five by
  // dev are seeds 9..5 with tests 0.99, 0.98, 0.97, 0.96, 0.95.
  for (std::uint64_t i = 0; i < 10; ++i) {
    runs.push_back(report(0.90 + 0.01 * static_cast<double>(i), 20200, 8 + i % 2, i,
                          0.90 + 0.01 * static_cast<double>(i)));
  }
  const Aggregate a = best_k_of_n(runs, 5);
  EXPECT_NEAR(a.test_acc.mean, 0.97, 1e-12);
  EXPECT_NEAR(a.test_acc.stddev, std::sqrt(0.00025), 1e-12);  // sample std of 5 steps of 0.01
  EXPECT_NEAR(a.q_hat.mean, (9 + 8 + 9 + 8 + 9) / 5.0, 1e-12);
  EXPECT_EQ(a.selected.front().seed, 9u);
  EXPECT_EQ(a.k, 5u);
  EXPECT_EQ(a.n, 10u);

  const Aggregate all = best_k_of_n(runs, 10);
  EXPECT_NEAR(all.test_acc.mean, 0.945, 1e-12);
  EXPECT_THROW(best_k_of_n(runs, 11), InputError);
  EXPECT_THROW(best_k_of_n(runs, 0), InputError);

  std::vector<RunReport> same(4, report(1.0, 220, 2, 0, 0.8));
  EXPECT_EQ(best_k_of_n(same, 3).test_acc.stddev, 0.0);
  EXPECT_EQ(best_k_of_n(same, 3).test_acc.mean, 0.8);
}

TEST(Median, OddEvenAndEmpty) {
  EXPECT_EQ(median(std::vector<double>{3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median(std::vector<double>{4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median(std::vector<double>{}), InputError);
}

TEST(RunReportJson, RoundTrip) {
  RunReport r = report(0.75, 220, 3, 12, 0.5);
  r.target = "T3";
  r.config = {{"q_max", 10}};
  const RunReport back = report_from_json(report_to_json(r));
  EXPECT_EQ(report_to_json(back), report_to_json(r));
  EXPECT_THROW(report_from_json(nlohmann::json::object()), ParseError);
}

}  // namespace
}  // namespace deepdfa
