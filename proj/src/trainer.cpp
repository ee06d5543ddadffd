// SPDX-License-Identifier: Apache-2.0
#include "deepdfa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "deepdfa/errors.hpp"
#include "deepdfa/evaluation.hpp"
#include "deepdfa/seed.hpp"

namespace deepdfa {

namespace {

std::string mode_name(TraceMode mode) {
  return mode == TraceMode::kCrisp ? "crisp" : "belief";
}

TraceMode mode_from_name(const std::string& name) {
  if (name == "crisp") return TraceMode::kCrisp;
  if (name == "belief") return TraceMode::kBelief;
  throw ParseError("unknown trace mode \"" + name + "\"");
}

// Mean BCE of the best constant predictor.
double label_entropy(const Samples& samples) {
  if (samples.empty()) return 0.0;
  const double p = static_cast<double>(count_positive(samples)) /
                   static_cast<double>(samples.size());
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_mode(const Samples& samples, TraceMode mode, const char* split) {
  for (const auto& s : samples) {
    if (s.mode != mode) {
      throw InputError(std::string(split) + " set holds " + mode_name(s.mode) +
                       " traces but the run is configured for " + mode_name(mode));
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be positive");
  if (max_epochs == 0) throw InputError("max_epochs must be at least 1");
  if (convergence_window == 0) throw InputError("convergence_window must be at least 1");
  if (!(init_stddev >= 0.0)) throw InputError("init_stddev must be non-negative");
  if (!(plateau_guard >= 0.0)) throw InputError("plateau_guard must be non-negative");
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs},
          {"batch_size", c.batch_size},
          {"convergence_window", c.convergence_window},
          {"convergence_tol", c.convergence_tol},
          {"agreement_tol", c.agreement_tol},
          {"seed", c.seed},
          {"mode", mode_name(c.mode)},
          {"init_stddev", c.init_stddev},
          {"plateau_guard", c.plateau_guard},
          {"optimizer", "adam"}};
}

TrainConfig config_from_json(const nlohmann::json& doc) {
  try {
    TrainConfig c;
    c.learning_rate = doc.at("learning_rate").get<double>();
    c.max_epochs = doc.at("max_epochs").get<std::size_t>();
    c.batch_size = doc.at("batch_size").get<std::size_t>();
    c.convergence_window = doc.at("convergence_window").get<std::size_t>();
    c.convergence_tol = doc.at("convergence_tol").get<double>();
    c.agreement_tol = doc.at("agreement_tol").get<double>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.mode = mode_from_name(doc.at("mode").get<std::string>());
    c.init_stddev = doc.at("init_stddev").get<double>();
    c.plateau_guard = doc.value("plateau_guard", c.plateau_guard);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed train config: ") + e.what());
  }
}

nlohmann::json schedule_to_json(const TempSchedule& s) {
  return {{"tau_0", s.tau_0}, {"decay", s.decay}, {"tau_min", s.tau_min}};
}

TempSchedule schedule_from_json(const nlohmann::json& doc) {
  try {
    TempSchedule s;
    s.tau_0 = doc.at("tau_0").get<double>();
    s.decay = doc.at("decay").get<double>();
    s.tau_min = doc.at("tau_min").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed schedule: ") + e.what());
  }
}

nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : c.history) {
    history.push_back({{"epoch", r.epoch},
                       {"tau", r.tau},
                       {"train_loss", r.train_loss},
                       {"train_acc", r.train_acc},
                       {"train_acc_discrete", r.train_acc_discrete},
                       {"dev_acc", r.dev_acc},
                       {"dev_acc_discrete", r.dev_acc_discrete}});
  }
  nlohmann::json doc = params_to_json(c.params);
  doc["alphabet"] = c.alphabet.names();
  doc["optimizer"] = adam_to_json(c.optimizer);
  doc["epoch"] = c.epoch;
  doc["tau"] = c.tau;
  doc["config"] = config_to_json(c.config);
  doc["schedule"] = schedule_to_json(c.schedule);
  doc["history"] = std::move(history);
  doc["finished"] = c.finished;
  doc["converged"] = c.converged;
  return doc;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("checkpoint must be a JSON object");
  try {
    Checkpoint c;
    c.params = params_from_json(doc);
    c.alphabet = Alphabet(doc.at("alphabet").get<std::vector<std::string>>());
    if (c.alphabet.size() != c.params.alphabet_size()) {
      throw ParseError("checkpoint alphabet does not match theta_h");
    }
    c.optimizer = adam_from_json(doc.at("optimizer"));
    if (!c.optimizer.m.empty() && c.optimizer.m.size() != c.params.values().size()) {
      throw ParseError("optimizer state does not match the parameters");
    }
    c.epoch = doc.at("epoch").get<std::size_t>();
    c.tau = doc.at("tau").get<double>();
    c.config = config_from_json(doc.at("config"));
    c.schedule = schedule_from_json(doc.at("schedule"));
    for (const auto& r : doc.at("history")) {
      EpochRecord e;
      e.epoch = r.at("epoch").get<std::size_t>();
      e.tau = r.at("tau").get<double>();
      e.train_loss = r.at("train_loss").get<double>();
      e.train_acc = r.at("train_acc").get<double>();
      e.train_acc_discrete = r.at("train_acc_discrete").get<double>();
      e.dev_acc = r.at("dev_acc").get<double>();
      e.dev_acc_discrete = r.at("dev_acc_discrete").get<double>();
      c.history.push_back(e);
    }
    c.finished = doc.at("finished").get<bool>();
    c.converged = doc.at("converged").get<bool>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("corrupt checkpoint: ") + e.what());
  } catch (const InputError& e) {
    throw ParseError(std::string("corrupt checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << checkpoint_to_json(ckpt).dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("corrupt checkpoint: ") + e.what());
  }
  return checkpoint_from_json(doc);
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,tau,train_loss,train_acc,dev_acc,dev_acc_discrete\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  r.tau, r.train_loss, r.train_acc, r.dev_acc, r.dev_acc_discrete);
    out << buf;
  }
  return out.str();
}

TrainResult train(const DatasetBundle& data, const Alphabet& alphabet,
                  std::size_t q_max, const TrainConfig& config,
                  const TempSchedule& schedule, const TrainOptions& options) {
  config.validate();
  schedule.validate();
  check_mode(data.train, config.mode, "train");
  check_mode(data.dev, config.mode, "dev");
  for (const auto& s : data.train) validate_sample(s, alphabet.size());

  Checkpoint state;
  if (options.resume) {
    state = *options.resume;
    if (state.params.q_max() != q_max ||
        state.params.alphabet_size() != alphabet.size()) {
      throw InputError("checkpoint does not match q_max or the alphabet");
    }
  } else {
    state.alphabet = alphabet;
    state.params = ModelParams::random(alphabet.size(), q_max,
                                       derive_seed(config.seed, "init"),
                                       config.init_stddev);
    state.config = config;
    state.schedule = schedule;
  }

  TrainResult result;
  if (state.finished) {
    result.converged = state.converged;
    result.stop_reason = state.converged ? "converged" : "max_epochs";
    result.state = std::move(state);
    return result;
  }

  const std::size_t n = data.train.size();
  const std::size_t batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
  std::vector<std::size_t> order(n);
  const double guard_loss = config.plateau_guard * label_entropy(data.train);
  Samples scratch;

  while (state.epoch < config.max_epochs) {
    if (options.stop_after && state.epoch >= *options.stop_after) {
      result.stop_reason = "stopped";
      result.state = std::move(state);
      return result;
    }
    const std::size_t epoch = state.epoch;
    const double tau = schedule.tau(epoch);

    std::iota(order.begin(), order.end(), 0);
    if (batch < n) {
      std::mt19937_64 rng(derive_seed(config.seed, "shuffle", epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      scratch.clear();
      for (std::size_t i = start; i < end; ++i) scratch.push_back(data.train[order[i]]);
      Gradients g = backward(state.params, tau, scratch);
      if (!std::isfinite(g.loss)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) +
                             " (tau=" + std::to_string(tau) +
                             ", grad norm=" + std::to_string(l2_norm(g.values)) + ")");
      }
      loss_sum += g.loss * static_cast<double>(end - start);
      for (std::size_t i = 0; i < scratch.size(); ++i) {
        if ((g.outputs[i] > 0.5) == (scratch[i].label == 1)) ++correct;
      }
      adam_step(state.params, g.values, state.optimizer, config.learning_rate);
    }
    for (double v : state.params.values()) {
      if (!std::isfinite(v)) {
        throw NumericalError("non-finite parameters at epoch " + std::to_string(epoch) +
                             " (tau=" + std::to_string(tau) + ")");
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.tau = tau;
    rec.train_loss = n ? loss_sum / static_cast<double>(n) : 0.0;
    rec.train_acc = n ? static_cast<double>(correct) / static_cast<double>(n) : 1.0;
    const Dfa extracted = extract_dfa(state.params, alphabet);
    rec.train_acc_discrete = accuracy(extracted, data.train).value;
    rec.dev_acc = accuracy(state.params, tau, data.dev).value;
    rec.dev_acc_discrete = accuracy(extracted, data.dev).value;
    state.history.push_back(rec);
    state.epoch = epoch + 1;
    state.tau = tau;
    if (options.on_epoch) options.on_epoch(rec);

    const std::size_t w = config.convergence_window;
    if (state.history.size() > w && rec.train_loss < guard_loss) {
      const double before = state.history[state.history.size() - 1 - w].train_loss;
      const bool plateau = before - rec.train_loss < config.convergence_tol;
      const bool agree =
          std::abs(rec.train_acc_discrete - rec.train_acc) <= config.agreement_tol;
      if (plateau && agree) {
        state.finished = true;
        state.converged = true;
        break;
      }
    }
  }
  if (!state.converged) state.finished = true;
  result.converged = state.converged;
  result.stop_reason = state.converged ? "converged" : "max_epochs";
  result.state = std::move(state);
  return result;
}

}  // namespace deepdfa
