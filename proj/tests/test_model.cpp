// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "deepdfa/errors.hpp"
#include "deepdfa/model.hpp"
#include "deepdfa/tomita.hpp"
#include "oracles.hpp"

namespace deepdfa {
namespace {

Samples random_batch(std::mt19937_64& rng, std::size_t k, std::size_t n,
                     std::size_t max_len, bool belief) {
  Samples out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = testing::random_trace(rng, k, max_len);
    const int label = static_cast<int>(rng() % 2);
    if (!belief) {
      out.push_back(TraceSample::crisp(x, label));
      continue;
    }
    std::vector<std::vector<double>> b;
    for (std::size_t t = 0; t < x.size(); ++t) {
      std::vector<double> v(k);
      double sum = 0.0;
      for (auto& e : v) sum += (e = u(rng));
      for (auto& e : v) e /= sum;
      b.push_back(v);
    }
    out.push_back(TraceSample::belief(b, label));
  }
  return out;
}

TraceSample as_one_hot(const TraceSample& s, std::size_t k) {
  std::vector<std::vector<double>> b;
  for (Symbol c : s.symbols) {
    std::vector<double> v(k, 0.0);
    v[c] = 1.0;
    b.push_back(v);
  }
  return TraceSample::belief(b, s.label);
}

TEST(SoftmaxWithTemp, Examples) {
  const std::vector<double> two{2.0, 0.0};
  const auto p = softmax_with_temp(two, 1.0);
  EXPECT_NEAR(p[0], std::exp(2.0) / (1 + std::exp(2.0)), 1e-15);
  EXPECT_NEAR(p[0], 0.8808, 1e-4);
  EXPECT_NEAR(p[1], 0.1192, 1e-4);
  for (double tau : {0.1, 1.0, 7.0}) {
    for (double v : softmax_with_temp(std::vector<double>{3.0, 3.0, 3.0}, tau)) {
      EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    }
  }
  const auto cold = softmax_with_temp(two, 1e-5);
  EXPECT_NEAR(cold[0], 1.0, 1e-12);
  EXPECT_NEAR(cold[1], 0.0, 1e-12);
  EXPECT_THROW(softmax_with_temp(two, 0.0), InputError);
  EXPECT_THROW(softmax_with_temp(two, -1.0), InputError);
}

TEST(SoftmaxWithTemp, ArgmaxAndNormalization) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> logits(6);
    for (auto& v : logits) v = n(rng);
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    for (double tau : {1e-5, 0.01, 0.5, 1.0, 10.0}) {
      const auto p = softmax_with_temp(logits, tau);
      double sum = 0.0;
      for (double v : p) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-12);
      EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), best);
    }
  }
}

TEST(SigmoidWithTemp, Examples) {
  EXPECT_EQ(sigmoid_with_temp(0.0, 0.3), 0.5);
  EXPECT_NEAR(sigmoid_with_temp(1.0, 1.0), 0.7311, 1e-4);
  EXPECT_LT(sigmoid_with_temp(-3.0, 1e-5), 1e-12);
  EXPECT_EQ(sigmoid_with_temp(3.0, 1e-5), 1.0);
  EXPECT_THROW(sigmoid_with_temp(1.0, 0.0), InputError);
}

TEST(BceLoss, Examples) {
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(1 - 1e-7, 1), 1e-7, 1e-12);
  EXPECT_NEAR(bce_loss(0.8808, 1), 0.1269, 1e-4);
  EXPECT_NEAR(bce_loss(0.0, 1), -std::log(kBceClip), 1e-9);
  EXPECT_NEAR(bce_loss(1.0, 0), -std::log(kBceClip), 1e-6);
}

TEST(TempSchedule, MonotoneAndFloored) {
  TempSchedule s;
  EXPECT_EQ(s.tau(0), 1.0);
  EXPECT_NEAR(s.tau(200), std::pow(0.999, 200), 1e-15);
  double prev = s.tau(0);
  for (std::size_t e = 1; e < 20000; e += 7) {
    const double t = s.tau(e);
    EXPECT_LE(t, prev);
    EXPECT_GE(t, s.tau_min);
    prev = t;
  }
  EXPECT_EQ(s.tau(1000000), 1e-5);
  TempSchedule bad;
  bad.decay = 1.0;
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(Forward, EmptyTraceReadsInitialOutput) {
  const ModelParams p = ModelParams::random(2, 5, 3);
  for (double tau : {1.0, 0.4}) {
    const auto f = forward(p, tau, TraceSample::crisp({}, 1));
    EXPECT_EQ(f.states.size(), 1u);
    EXPECT_DOUBLE_EQ(f.output, sigmoid_with_temp(p.output_logits()[0], tau));
  }
}

TEST(Forward, EmbeddedDfaIsNearlyCrisp) {
  std::mt19937_64 rng(4);
  for (int k = 1; k <= 7; ++k) {
    const Dfa d = tomita::dfa(tomita::TomitaId(k));
    const ModelParams p = testing::embed_dfa(d, 6);
    for (int i = 0; i < 100; ++i) {
      const auto x = testing::random_trace(rng, 2, 30);
      const double y = forward(p, 1.0, TraceSample::crisp(x, 0)).output;
      EXPECT_NEAR(y, dfa_accepts(d, x) ? 1.0 : 0.0, 1e-7);
      const double cold = forward(p, 0.5, TraceSample::crisp(x, 0)).output;
      EXPECT_NEAR(cold, dfa_accepts(d, x) ? 1.0 : 0.0, 1e-9);
    }
  }
}

TEST(Forward, UniformBeliefsWithEqualTransitionsMatchCrisp) {
  ModelParams p = ModelParams::random(2, 4, 8);
  auto t0 = p.transition_logits(0);
  auto t1 = p.transition_logits(1);
  std::copy(t0.begin(), t0.end(), t1.begin());
  const std::vector<Symbol> x{0, 1, 1, 0, 1};
  const double crisp = forward(p, 0.7, TraceSample::crisp(x, 1)).output;
  const TraceSample uniform = TraceSample::belief(
      std::vector<std::vector<double>>(x.size(), {0.5, 0.5}), 1);
  EXPECT_NEAR(forward(p, 0.7, uniform).output, crisp, 1e-14);
}

TEST(Forward, RejectsDimensionMismatch) {
  const ModelParams p = ModelParams::random(2, 3, 1);
  EXPECT_THROW(forward(p, 1.0, TraceSample::crisp({0, 2}, 1)), InputError);
  EXPECT_THROW(forward(p, 1.0, TraceSample::belief({{1.0, 0.0, 0.0}}, 1)), InputError);
  EXPECT_THROW(forward(p, 0.0, TraceSample::crisp({0}, 1)), InputError);
}

TEST(Forward, StatesStayOnTheSimplex) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 1 + rng() % 3;
    const ModelParams p = ModelParams::random(k, 1 + rng() % 8, rng(), 2.0);
    const double tau = std::uniform_real_distribution<double>(0.05, 2.0)(rng);
    for (const auto& s : random_batch(rng, k, 2, 25, i % 2 == 1)) {
      const auto f = forward(p, tau, s);
      for (const auto& h : f.states) {
        double sum = 0.0;
        for (double v : h) {
          EXPECT_GE(v, 0.0);
          sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
      }
      EXPECT_GE(f.output, 0.0);
      EXPECT_LE(f.output, 1.0);
    }
  }
}

TEST(Forward, OneHotBeliefsMatchCrispMode) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 1 + rng() % 3;
    const ModelParams p = ModelParams::random(k, 1 + rng() % 6, rng());
    const double tau = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    const auto s = random_batch(rng, k, 1, 20, false)[0];
    const double crisp = forward(p, tau, s).output;
    EXPECT_NEAR(forward(p, tau, as_one_hot(s, k)).output, crisp, 1e-12);
  }
}

TEST(Backward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 25; ++i) {
    const bool belief = i % 2 == 1;
    const ModelParams p = ModelParams::random(2, 4, rng());
    const Samples batch = random_batch(rng, 2, 8, 5, belief);
    const double tau = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
    const Gradients g = backward(p, tau, batch);
    EXPECT_NEAR(g.loss, testing::reference_loss(p, tau, batch), 1e-12);
    EXPECT_LT(testing::max_fd_relative_error(p, tau, batch, g.values), 1e-4);
  }
}

TEST(Backward, OutputsMatchReferenceForward) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 50; ++i) {
    const std::size_t k = 1 + rng() % 3;
    const ModelParams p = ModelParams::random(k, 1 + rng() % 7, rng());
    const Samples batch = random_batch(rng, k, 1 + rng() % 40, 12, i % 3 == 0);
    const Gradients g = backward(p, 0.8, batch);
    const auto pred = predict(p, 0.8, batch);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const double y = forward(p, 0.8, batch[j]).output;
      EXPECT_NEAR(g.outputs[j], y, 1e-12);
      EXPECT_NEAR(pred[j], y, 1e-12);
    }
  }
}

TEST(Backward, EmptyBatch) {
  const ModelParams p = ModelParams::random(2, 3, 1);
  const Gradients g = backward(p, 1.0, Samples{});
  EXPECT_EQ(g.loss, 0.0);
  for (double v : g.values) EXPECT_EQ(v, 0.0);
}

TEST(Backward, SymbolSwapSymmetry) {
  // Parameters invariant under swapping the two symbols, and a batch closed
  // under the swap, give a gradient with the same symmetry.
  ModelParams p = ModelParams::random(2, 4, 77);
  auto t0 = p.transition_logits(0);
  auto t1 = p.transition_logits(1);
  std::copy(t0.begin(), t0.end(), t1.begin());
  const Samples batch = {TraceSample::crisp({0, 1, 1}, 1), TraceSample::crisp({1, 0, 0}, 1),
                         TraceSample::crisp({0, 0}, 0), TraceSample::crisp({1, 1}, 0)};
  const Gradients g = backward(p, 0.9, batch);
  const std::size_t block = 16;
  for (std::size_t i = 0; i < block; ++i) {
    EXPECT_NEAR(g.values[i], g.values[block + i], 1e-14);
  }
}

TEST(Backward, MixedModesRejected) {
  const ModelParams p = ModelParams::random(2, 3, 1);
  const Samples mixed = {TraceSample::crisp({0}, 1), TraceSample::belief({{1.0, 0.0}}, 0)};
  EXPECT_THROW(backward(p, 1.0, mixed), InputError);
}

TEST(Adam, FirstStepIsLearningRate) {
  ModelParams p(1, 1);
  p.values() = {0.0, 0.0};
  AdamState s;
  adam_step(p, std::vector<double>{3.0, -0.5}, s, 0.01);
  EXPECT_NEAR(p.values()[0], -0.01, 1e-9);
  EXPECT_NEAR(p.values()[1], 0.01, 1e-9);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParams) {
  ModelParams p = ModelParams::random(2, 3, 5);
  const ModelParams before = p;
  AdamState s;
  for (int i = 0; i < 3; ++i) adam_step(p, std::vector<double>(p.values().size(), 0.0), s, 0.01);
  EXPECT_EQ(p, before);
}

TEST(Adam, StateRoundTrip) {
  ModelParams p = ModelParams::random(2, 3, 5);
  AdamState s;
  adam_step(p, std::vector<double>(p.values().size(), 0.25), s, 0.01);
  EXPECT_EQ(adam_from_json(adam_to_json(s)), s);
  EXPECT_EQ(params_from_json(params_to_json(p)), p);
}

TEST(ParamsJson, Errors) {
  nlohmann::json doc = params_to_json(ModelParams::random(2, 3, 1));
  doc["theta_y"] = {1.0, 2.0};
  EXPECT_THROW(params_from_json(doc), ParseError);
  nlohmann::json missing = params_to_json(ModelParams::random(2, 3, 1));
  missing.erase("theta_h");
  EXPECT_THROW(params_from_json(missing), ParseError);
}

TEST(ModelParams, RandomIsSeeded) {
  EXPECT_EQ(ModelParams::random(2, 5, 9), ModelParams::random(2, 5, 9));
  EXPECT_NE(ModelParams::random(2, 5, 9), ModelParams::random(2, 5, 10));
  EXPECT_EQ(ModelParams(3, 4).values().size(), 3u * 16u + 4u);
}

}  // namespace
}  // namespace deepdfa
