// SPDX-License-Identifier: Apache-2.0
//
// The relaxed automaton: unconstrained transition/output logits turned into
// a probabilistic automaton by temperature-scaled softmax and sigmoid.
//
//   h_0 = e_0
//   h_t = h_{t-1} T[x_t]                 (crisp symbols)
//   h_t = sum_p x_{t,p} h_{t-1} T[p]     (belief vectors)
//   y   = h_l . v_o
//   T[p][q][.] = softmax(theta_h[p][q][.] / tau),  v_o = sigmoid(theta_y / tau)
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepdfa/automata.hpp"
#include "deepdfa/dataset.hpp"

namespace deepdfa {

/// softmax(logits / tau) with max subtraction. Throws InputError if tau <= 0.
std::vector<double> softmax_with_temp(std::span<const double> logits, double tau);

/// 1 / (1 + exp(-x / tau)) without overflow. Throws InputError if tau <= 0.
double sigmoid_with_temp(double x, double tau);

/// Trainable logits in one flat buffer: theta_h as |P| row-major
/// q_max x q_max blocks (row = source state), followed by theta_y.
class ModelParams {
 public:
  ModelParams(std::size_t alphabet_size, std::size_t q_max);

  /// Entries drawn i.i.d. from N(0, stddev^2).
  static ModelParams random(std::size_t alphabet_size, std::size_t q_max,
                            std::uint64_t seed, double stddev = 1.0);

  std::size_t alphabet_size() const noexcept { return alphabet_size_; }
  std::size_t q_max() const noexcept { return q_max_; }

  std::span<double> transition_logits(Symbol p);
  std::span<const double> transition_logits(Symbol p) const;
  double& transition_logit(Symbol p, StateId from, StateId to) {
    return values_[(static_cast<std::size_t>(p) * q_max_ + from) * q_max_ + to];
  }
  double transition_logit(Symbol p, StateId from, StateId to) const {
    return values_[(static_cast<std::size_t>(p) * q_max_ + from) * q_max_ + to];
  }
  std::span<double> output_logits();
  std::span<const double> output_logits() const;

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const ModelParams&) const = default;

 private:
  std::size_t alphabet_size_;
  std::size_t q_max_;
  std::vector<double> values_;
};

/// Geometric annealing: tau(e) = max(tau_min, tau_0 * decay^e).
struct TempSchedule {
  double tau_0 = 1.0;
  double decay = 0.999;
  double tau_min = 1e-5;

  double tau(std::size_t epoch) const;
  void validate() const;
};

struct ForwardTrace {
  std::vector<std::vector<double>> states;  // h_0 .. h_l
  double output = 0.0;                      // y_l
};

/// Reference per-trace evaluation. Throws InputError on a symbol or belief
/// dimension mismatch or a non-positive tau.
ForwardTrace forward(const ModelParams& params, double tau,
                     const TraceSample& sample);

inline constexpr double kBceClip = 1e-7;

/// Binary cross-entropy with y clamped to [kBceClip, 1 - kBceClip].
double bce_loss(double y, int label);

struct Gradients {
  std::vector<double> values;   // same layout as ModelParams::values()
  double loss = 0.0;            // mean BCE over the batch
  std::vector<double> outputs;  // y per sample, in batch order
};

/// Mean BCE over the batch and its exact gradient with respect to every
/// logit. Traces are bucketed by length and evaluated as matrix products.
/// An empty batch yields zero gradients and zero loss.
Gradients backward(const ModelParams& params, double tau,
                   std::span<const TraceSample> batch);

/// Batched acceptance probabilities, in sample order.
std::vector<double> predict(const ModelParams& params, double tau,
                            std::span<const TraceSample> samples);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected adaptive-moment update in place.
void adam_step(ModelParams& params, std::span<const double> gradient,
               AdamState& state, double learning_rate);

nlohmann::json params_to_json(const ModelParams& params);
ModelParams params_from_json(const nlohmann::json& doc);
nlohmann::json adam_to_json(const AdamState& state);
AdamState adam_from_json(const nlohmann::json& doc);

}  // namespace deepdfa
