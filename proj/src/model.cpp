// SPDX-License-Identifier: Apache-2.0
#include "deepdfa/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "deepdfa/errors.hpp"

namespace deepdfa {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::Index;

void check_tau(double tau) {
  if (!(tau > 0.0)) throw InputError("temperature must be positive");
}

// T[p] and v_o for one temperature.
struct Activations {
  std::vector<RowMatrix> transition;
  Eigen::VectorXd output;
};

Activations activate(const ModelParams& params, double tau) {
  check_tau(tau);
  const auto q = static_cast<Index>(params.q_max());
  Activations act;
  act.transition.reserve(params.alphabet_size());
  for (Symbol p = 0; p < params.alphabet_size(); ++p) {
    Eigen::Map<const RowMatrix> logits(params.transition_logits(p).data(), q, q);
    RowMatrix t = logits / tau;
    for (Index r = 0; r < q; ++r) {
      auto row = t.row(r);
      row.array() = (row.array() - row.maxCoeff()).exp();
      row /= row.sum();
    }
    act.transition.push_back(std::move(t));
  }
  act.output.resize(q);
  const auto theta_y = params.output_logits();
  for (Index i = 0; i < q; ++i) act.output[i] = sigmoid_with_temp(theta_y[i], tau);
  return act;
}

// A batch evaluated as one unit: traces are sorted by decreasing length and
// aligned at their last step, so at step t the active traces form a prefix
// of the rows. Rows that have not started yet hold h = e_0 and are skipped.
struct Batch {
  std::size_t alphabet_size = 0;
  std::vector<std::size_t> order;  // row -> sample index in the input span
  std::size_t steps = 0;
  std::vector<Index> active;       // active rows at step t (1-based)
  bool belief = false;
  // Crisp: rows grouped by symbol, per step.
  std::vector<std::vector<std::vector<Index>>> rows_by_symbol;
  // Belief: per step, per symbol, the symbol's probability for active rows.
  std::vector<std::vector<Eigen::VectorXd>> weights;
};

Batch prepare(std::span<const TraceSample> samples, std::size_t alphabet_size) {
  Batch b;
  b.alphabet_size = alphabet_size;
  const std::size_t n = samples.size();
  b.order.resize(n);
  std::iota(b.order.begin(), b.order.end(), 0);
  std::stable_sort(b.order.begin(), b.order.end(), [&](std::size_t x, std::size_t y) {
    return samples[x].length() > samples[y].length();
  });
  if (n == 0) return b;

  const TraceMode mode = samples[b.order[0]].mode;
  for (const auto& s : samples) {
    if (s.mode != mode) throw InputError("batch mixes crisp and belief traces");
  }
  b.belief = mode == TraceMode::kBelief;
  b.steps = samples[b.order[0]].length();
  b.active.assign(b.steps + 1, 0);
  if (b.belief) {
    b.weights.assign(b.steps + 1, {});
  } else {
    b.rows_by_symbol.assign(b.steps + 1,
                            std::vector<std::vector<Index>>(alphabet_size));
  }
  for (std::size_t t = 1; t <= b.steps; ++t) {
    Index active = 0;
    while (static_cast<std::size_t>(active) < n &&
           b.steps - samples[b.order[active]].length() < t) {
      ++active;
    }
    b.active[t] = active;
    if (b.belief) {
      b.weights[t].assign(alphabet_size, Eigen::VectorXd(active));
    }
    for (Index r = 0; r < active; ++r) {
      const auto& s = samples[b.order[r]];
      const std::size_t pos = t - 1 - (b.steps - s.length());
      if (b.belief) {
        const auto& x = s.beliefs[pos];
        if (x.size() != alphabet_size) {
          throw InputError("belief vector length does not match the alphabet");
        }
        for (std::size_t p = 0; p < alphabet_size; ++p) b.weights[t][p][r] = x[p];
      } else {
        const Symbol c = s.symbols[pos];
        if (c >= alphabet_size) {
          throw InputError("symbol " + std::to_string(c) + " out of range");
        }
        b.rows_by_symbol[t][c].push_back(r);
      }
    }
  }
  return b;
}

// h_t from h_{t-1} for the active rows; inactive rows are left untouched.
void step_forward(const Batch& b, const Activations& act, std::size_t t,
                  const RowMatrix& prev, RowMatrix& next) {
  const Index active = b.active[t];
  if (b.belief) {
    next.topRows(active).setZero();
    for (std::size_t p = 0; p < b.alphabet_size; ++p) {
      next.topRows(active).noalias() +=
          b.weights[t][p].asDiagonal() * (prev.topRows(active) * act.transition[p]);
    }
    return;
  }
  for (std::size_t p = 0; p < b.alphabet_size; ++p) {
    const auto& rows = b.rows_by_symbol[t][p];
    if (rows.empty()) continue;
    if (static_cast<Index>(rows.size()) == active) {
      next.topRows(active).noalias() = prev.topRows(active) * act.transition[p];
    } else {
      RowMatrix sub = prev(rows, Eigen::all);
      next(rows, Eigen::all) = sub * act.transition[p];
    }
  }
}

RowMatrix initial_states(Index rows, Index q) {
  RowMatrix h = RowMatrix::Zero(rows, q);
  h.col(0).setOnes();
  return h;
}

std::vector<double> unsort(const Batch& b, const Eigen::VectorXd& y) {
  std::vector<double> out(b.order.size());
  for (std::size_t r = 0; r < b.order.size(); ++r) out[b.order[r]] = y[static_cast<Index>(r)];
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Activations

std::vector<double> softmax_with_temp(std::span<const double> logits, double tau) {
  check_tau(tau);
  if (logits.empty()) return {};
  const double max = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - max) / tau);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

double sigmoid_with_temp(double x, double tau) {
  check_tau(tau);
  const double z = x / tau;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Parameters and schedule

ModelParams::ModelParams(std::size_t alphabet_size, std::size_t q_max)
    : alphabet_size_(alphabet_size),
      q_max_(q_max),
      values_(alphabet_size * q_max * q_max + q_max, 0.0) {
  if (alphabet_size == 0) throw InputError("alphabet size must be at least 1");
  if (q_max == 0) throw InputError("q_max must be at least 1");
}

ModelParams ModelParams::random(std::size_t alphabet_size, std::size_t q_max,
                                std::uint64_t seed, double stddev) {
  ModelParams params(alphabet_size, q_max);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : params.values_) v = dist(rng);
  return params;
}

std::span<double> ModelParams::transition_logits(Symbol p) {
  if (p >= alphabet_size_) throw InputError("symbol out of range");
  return {values_.data() + static_cast<std::size_t>(p) * q_max_ * q_max_,
          q_max_ * q_max_};
}

std::span<const double> ModelParams::transition_logits(Symbol p) const {
  if (p >= alphabet_size_) throw InputError("symbol out of range");
  return {values_.data() + static_cast<std::size_t>(p) * q_max_ * q_max_,
          q_max_ * q_max_};
}

std::span<double> ModelParams::output_logits() {
  return {values_.data() + alphabet_size_ * q_max_ * q_max_, q_max_};
}

std::span<const double> ModelParams::output_logits() const {
  return {values_.data() + alphabet_size_ * q_max_ * q_max_, q_max_};
}

double TempSchedule::tau(std::size_t epoch) const {
  return std::max(tau_min, tau_0 * std::pow(decay, static_cast<double>(epoch)));
}

void TempSchedule::validate() const {
  if (!(tau_0 > 0.0)) throw InputError("tau_0 must be positive");
  if (!(decay > 0.0 && decay < 1.0)) throw InputError("decay must lie in (0, 1)");
  if (!(tau_min > 0.0)) throw InputError("tau_min must be positive");
}

// ---------------------------------------------------------------------------
// Reference forward pass

ForwardTrace forward(const ModelParams& params, double tau,
                     const TraceSample& sample) {
  check_tau(tau);
  const std::size_t q = params.q_max();
  const std::size_t k = params.alphabet_size();

  std::vector<std::vector<double>> transition(k * q);
  for (Symbol p = 0; p < k; ++p) {
    const auto logits = params.transition_logits(p);
    for (std::size_t r = 0; r < q; ++r) {
      transition[p * q + r] = softmax_with_temp(logits.subspan(r * q, q), tau);
    }
  }
  // h * T[p]
  auto propagate = [&](const std::vector<double>& h, Symbol p) {
    std::vector<double> out(q, 0.0);
    for (std::size_t r = 0; r < q; ++r) {
      const auto& row = transition[p * q + r];
      for (std::size_t c = 0; c < q; ++c) out[c] += h[r] * row[c];
    }
    return out;
  };

  ForwardTrace trace;
  std::vector<double> h(q, 0.0);
  h[0] = 1.0;
  trace.states.push_back(h);
  for (std::size_t t = 0; t < sample.length(); ++t) {
    std::vector<double> next(q, 0.0);
    if (sample.mode == TraceMode::kCrisp) {
      const Symbol c = sample.symbols[t];
      if (c >= k) throw InputError("symbol " + std::to_string(c) + " out of range");
      next = propagate(h, c);
    } else {
      const auto& x = sample.beliefs[t];
      if (x.size() != k) {
        throw InputError("belief vector length does not match the alphabet");
      }
      for (Symbol p = 0; p < k; ++p) {
        const auto contrib = propagate(h, p);
        for (std::size_t c = 0; c < q; ++c) next[c] += x[p] * contrib[c];
      }
    }
    h = std::move(next);
    trace.states.push_back(h);
  }
  const auto theta_y = params.output_logits();
  for (std::size_t r = 0; r < q; ++r) {
    trace.output += h[r] * sigmoid_with_temp(theta_y[r], tau);
  }
  return trace;
}

double bce_loss(double y, int label) {
  const double yc = std::clamp(y, kBceClip, 1.0 - kBceClip);
  return label == 1 ? -std::log(yc) : -std::log(1.0 - yc);
}

// ---------------------------------------------------------------------------
// Batched evaluation and gradients

std::vector<double> predict(const ModelParams& params, double tau,
                            std::span<const TraceSample> samples) {
  constexpr std::size_t kChunk = 512;
  const auto act = activate(params, tau);
  const auto q = static_cast<Index>(params.q_max());
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const auto chunk = samples.subspan(start, std::min(kChunk, samples.size() - start));
    const Batch b = prepare(chunk, params.alphabet_size());
    const auto rows = static_cast<Index>(chunk.size());
    RowMatrix prev = initial_states(rows, q);
    RowMatrix next = prev;
    for (std::size_t t = 1; t <= b.steps; ++t) {
      step_forward(b, act, t, prev, next);
      prev.topRows(b.active[t]) = next.topRows(b.active[t]);
    }
    const Eigen::VectorXd y = prev * act.output;
    const auto ys = unsort(b, y);
    out.insert(out.end(), ys.begin(), ys.end());
  }
  return out;
}

Gradients backward(const ModelParams& params, double tau,
                   std::span<const TraceSample> batch) {
  Gradients g;
  g.values.assign(params.values().size(), 0.0);
  if (batch.empty()) return g;

  const auto act = activate(params, tau);
  const auto q = static_cast<Index>(params.q_max());
  const std::size_t k = params.alphabet_size();
  const Batch b = prepare(batch, k);
  const auto rows = static_cast<Index>(batch.size());

  // Forward with every h_t kept.
  std::vector<RowMatrix> h(b.steps + 1);
  h[0] = initial_states(rows, q);
  for (std::size_t t = 1; t <= b.steps; ++t) {
    h[t] = h[t - 1];
    step_forward(b, act, t, h[t - 1], h[t]);
  }
  const Eigen::VectorXd y = h[b.steps] * act.output;

  // Loss and dL/dy (gradient taken at the clamped value).
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Eigen::VectorXd dy(rows);
  double loss = 0.0;
  for (Index r = 0; r < rows; ++r) {
    const int label = batch[b.order[static_cast<std::size_t>(r)]].label;
    const double yc = std::clamp(y[r], kBceClip, 1.0 - kBceClip);
    loss += label == 1 ? -std::log(yc) : -std::log(1.0 - yc);
    dy[r] = (label == 1 ? -1.0 / yc : 1.0 / (1.0 - yc)) * inv_n;
  }
  g.loss = loss * inv_n;
  g.outputs = unsort(b, y);

  // Adjoint of the recurrence.
  Eigen::VectorXd d_output = h[b.steps].transpose() * dy;
  std::vector<RowMatrix> d_transition(k, RowMatrix::Zero(q, q));
  RowMatrix grad = dy * act.output.transpose();
  RowMatrix grad_prev(rows, q);
  for (std::size_t t = b.steps; t >= 1; --t) {
    const Index active = b.active[t];
    const auto h_prev = h[t - 1].topRows(active);
    const auto g_now = grad.topRows(active);
    const bool need_prev = t > 1;
    if (b.belief) {
      if (need_prev) grad_prev.topRows(active).setZero();
      for (std::size_t p = 0; p < k; ++p) {
        const auto& w = b.weights[t][p];
        d_transition[p].noalias() += (w.asDiagonal() * h_prev).transpose() * g_now;
        if (need_prev) {
          grad_prev.topRows(active).noalias() +=
              w.asDiagonal() * (g_now * act.transition[p].transpose());
        }
      }
    } else {
      for (std::size_t p = 0; p < k; ++p) {
        const auto& sel = b.rows_by_symbol[t][p];
        if (sel.empty()) continue;
        if (static_cast<Index>(sel.size()) == active) {
          d_transition[p].noalias() += h_prev.transpose() * g_now;
          if (need_prev) {
            grad_prev.topRows(active).noalias() =
                g_now * act.transition[p].transpose();
          }
        } else {
          const RowMatrix hs = h[t - 1](sel, Eigen::all);
          const RowMatrix gs = grad(sel, Eigen::all);
          d_transition[p].noalias() += hs.transpose() * gs;
          if (need_prev) {
            grad_prev(sel, Eigen::all) = gs * act.transition[p].transpose();
          }
        }
      }
    }
    if (need_prev) grad.topRows(active) = grad_prev.topRows(active);
  }

  // Through softmax(theta/tau) and sigmoid(theta/tau).
  for (std::size_t p = 0; p < k; ++p) {
    const RowMatrix& t = act.transition[p];
    const RowMatrix& dt = d_transition[p];
    const Eigen::VectorXd inner = (dt.array() * t.array()).rowwise().sum();
    Eigen::Map<RowMatrix> out(g.values.data() + p * static_cast<std::size_t>(q * q), q, q);
    out = (t.array() * (dt.colwise() - inner).array()) / tau;
  }
  double* out_y = g.values.data() + k * static_cast<std::size_t>(q * q);
  for (Index i = 0; i < q; ++i) {
    const double v = act.output[i];
    out_y[i] = d_output[i] * v * (1.0 - v) / tau;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Optimizer

void adam_step(ModelParams& params, std::span<const double> gradient,
               AdamState& state, double learning_rate) {
  auto& theta = params.values();
  if (gradient.size() != theta.size()) {
    throw InputError("gradient size does not match the parameters");
  }
  if (state.m.size() != theta.size()) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double gi = gradient[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * gi;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * gi * gi;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    theta[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json params_to_json(const ModelParams& params) {
  const std::size_t q = params.q_max();
  nlohmann::json theta_h = nlohmann::json::array();
  for (Symbol p = 0; p < params.alphabet_size(); ++p) {
    nlohmann::json block = nlohmann::json::array();
    for (std::size_t r = 0; r < q; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t c = 0; c < q; ++c) {
        row.push_back(params.transition_logit(p, static_cast<StateId>(r),
                                              static_cast<StateId>(c)));
      }
      block.push_back(std::move(row));
    }
    theta_h.push_back(std::move(block));
  }
  const auto ty = params.output_logits();
  return {{"q_max", q},
          {"alphabet_size", params.alphabet_size()},
          {"theta_h", std::move(theta_h)},
          {"theta_y", std::vector<double>(ty.begin(), ty.end())}};
}

ModelParams params_from_json(const nlohmann::json& doc) {
  try {
    const auto q = doc.at("q_max").get<std::size_t>();
    const auto k = doc.at("alphabet_size").get<std::size_t>();
    ModelParams params(k, q);
    const auto& theta_h = doc.at("theta_h");
    if (!theta_h.is_array() || theta_h.size() != k) {
      throw ParseError("field \"theta_h\" must have alphabet_size blocks");
    }
    for (Symbol p = 0; p < k; ++p) {
      const auto& block = theta_h[p];
      if (!block.is_array() || block.size() != q) {
        throw ParseError("field \"theta_h\" block must have q_max rows");
      }
      for (std::size_t r = 0; r < q; ++r) {
        if (!block[r].is_array() || block[r].size() != q) {
          throw ParseError("field \"theta_h\" row must have q_max entries");
        }
        for (std::size_t c = 0; c < q; ++c) {
          params.transition_logit(p, static_cast<StateId>(r),
                                  static_cast<StateId>(c)) =
              block[r][c].get<double>();
        }
      }
    }
    const auto ty = doc.at("theta_y").get<std::vector<double>>();
    if (ty.size() != q) throw ParseError("field \"theta_y\" must have q_max entries");
    std::copy(ty.begin(), ty.end(), params.output_logits().begin());
    for (double v : params.values()) {
      if (!std::isfinite(v)) throw ParseError("parameters must be finite");
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed parameters: ") + e.what());
  } catch (const InputError& e) {
    throw ParseError(e.what());
  }
}

nlohmann::json adam_to_json(const AdamState& state) {
  return {{"beta1", state.beta1}, {"beta2", state.beta2},
          {"epsilon", state.epsilon}, {"step", state.step},
          {"m", state.m}, {"v", state.v}};
}

AdamState adam_from_json(const nlohmann::json& doc) {
  try {
    AdamState s;
    s.beta1 = doc.at("beta1").get<double>();
    s.beta2 = doc.at("beta2").get<double>();
    s.epsilon = doc.at("epsilon").get<double>();
    s.step = doc.at("step").get<std::uint64_t>();
    s.m = doc.at("m").get<std::vector<double>>();
    s.v = doc.at("v").get<std::vector<double>>();
    if (s.m.size() != s.v.size()) throw ParseError("optimizer moment sizes differ");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed optimizer state: ") + e.what());
  }
}

}  // namespace deepdfa
