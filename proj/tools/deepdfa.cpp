// SPDX-License-Identifier: Apache-2.0
//
// deepdfa command-line tool: gen-dfa, gen-data, train, bench, export.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "deepdfa/errors.hpp"
#include "deepdfa/experiment.hpp"
#include "deepdfa/seed.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace deepdfa;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2, kPartial = 3 };

std::string default_out_dir() {
  const char* env = std::getenv("DEEPDFA_OUT");
  return env && *env ? env : "deepdfa-out";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_doubles(const std::vector<double>& values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ' ';
    out += fixed(v, 3);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared option groups

const CLI::Validator kAtLeastOne(
    [](std::string& value) -> std::string {
      try {
        if (std::stod(value) >= 1.0) return {};
      } catch (const std::exception&) {
      }
      return "must be at least 1, got " + value;
    },
    "INT>=1");

struct TargetArgs {
  int tomita = 0;
  std::size_t random_states = 0;
  std::size_t random_symbols = 2;
  std::uint64_t random_seed = 0;
  std::string dfa_file;

  void add(CLI::App* app) {
    auto* t = app->add_option("--tomita", tomita, "Tomita language 1..7")
                  ->check(CLI::Range(1, 7));
    auto* r = app->add_option("--random-states", random_states,
                              "Random target with this many states")
                  ->check(kAtLeastOne);
    app->add_option("--random-symbols", random_symbols, "Alphabet size of a random target")
        ->check(kAtLeastOne);
    app->add_option("--random-seed", random_seed, "Seed of a random target");
    auto* d = app->add_option("--dfa", dfa_file, "Target DFA JSON file")
                  ->check(CLI::ExistingFile);
    t->excludes(r)->excludes(d);
    r->excludes(d);
  }

  bool given() const { return tomita != 0 || random_states != 0 || !dfa_file.empty(); }

  TargetSpec spec() const {
    if (tomita != 0) return TargetSpec::tomita_language(tomita);
    if (random_states != 0) return TargetSpec::random(random_states, random_symbols, random_seed);
    if (!dfa_file.empty()) return TargetSpec::dfa_file(dfa_file);
    throw CLI::ValidationError("target", "one of --tomita, --random-states or --dfa is required");
  }
};

struct DataArgs {
  std::size_t train_size = 0;
  std::size_t dev_size = 0;
  std::size_t test_size = 0;
  std::size_t len_train = 0;
  double flip = 0.0;
  double symbol_noise = 0.0;
  bool raw_noise = false;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--train-size", train_size, "Train traces (0 = table default)");
    app->add_option("--dev-size", dev_size, "Dev traces (0 = table default)");
    app->add_option("--test-size", test_size, "Test traces (0 = table default)");
    app->add_option("--len-train", len_train, "Longest train trace; dev 2x, test 3x");
    app->add_option("--flip", flip, "Fraction of train labels flipped")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--symbol-noise", symbol_noise,
                    "Gaussian variance on train symbols (belief traces)")
        ->check(CLI::NonNegativeNumber);
    app->add_flag("--raw-noise", raw_noise, "Keep corrupted beliefs off the simplex");
    app->add_option("--data-seed", seed, "Dataset seed");
  }

  DatasetParams params() const {
    DatasetParams p;
    if (train_size) p.train_size = train_size;
    if (dev_size) p.dev_size = dev_size;
    if (test_size) p.test_size = test_size;
    if (len_train) p.len_train = len_train;
    p.flip = flip;
    p.symbol_noise = symbol_noise;
    p.symbol_noise_raw = raw_noise;
    p.seed = seed;
    return p;
  }
};

struct ModelArgs {
  TrainConfig train;
  TempSchedule schedule;

  void add(CLI::App* app) {
    app->add_option("--lr", train.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
    app->add_option("--epochs", train.max_epochs, "Maximum epochs")->check(kAtLeastOne);
    app->add_option("--batch", train.batch_size, "Mini-batch size (0 = full batch)");
    app->add_option("--window", train.convergence_window, "Convergence window (epochs)");
    app->add_option("--tol", train.convergence_tol, "Loss improvement tolerance");
    app->add_option("--agree-tol", train.agreement_tol,
                    "Allowed gap between discrete and continuous train accuracy");
    app->add_option("--plateau-guard", train.plateau_guard,
                    "Stopping needs loss below this fraction of the label entropy");
    app->add_option("--init-std", train.init_stddev, "Initial logit standard deviation");
    app->add_option("--tau0", schedule.tau_0, "Initial temperature")->check(CLI::PositiveNumber);
    app->add_option("--decay", schedule.decay, "Temperature decay per epoch");
    app->add_option("--tau-min", schedule.tau_min, "Temperature floor")
        ->check(CLI::PositiveNumber);
  }
};

// ---------------------------------------------------------------------------
// Dataset directories

void save_dataset(const fs::path& dir, const DatasetBundle& data, const json& manifest) {
  fs::create_directories(dir);
  for (const auto& [name, split] :
       {std::pair{"train", &data.train}, {"dev", &data.dev}, {"test", &data.test}}) {
    std::ofstream out(dir / (std::string(name) + ".jsonl"), std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    write_jsonl(out, *split);
  }
  write_text(dir / "manifest.json", dump(manifest));
}

Samples load_split(const fs::path& dir, const std::string& name) {
  const fs::path path = dir / (name + ".jsonl");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing dataset file " + path.string());
  try {
    return read_jsonl(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

struct LoadedData {
  Target target;
  DatasetBundle data;
};

LoadedData load_dataset(const fs::path& dir) {
  LoadedData out;
  const json manifest = read_json(dir / "manifest.json");
  try {
    std::vector<std::string> names = manifest.at("alphabet").get<std::vector<std::string>>();
    out.target.alphabet = Alphabet(std::move(names));
    out.target.name = manifest.at("target").get<std::string>();
    out.target.minimal_states = manifest.value("target_minimal_states", std::size_t{0});
  } catch (const json::exception& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  }
  out.data.train = load_split(dir, "train");
  out.data.dev = load_split(dir, "dev");
  out.data.test = load_split(dir, "test");
  out.data.metadata = manifest.value("dataset", json::object());
  for (const Samples* split : {&out.data.train, &out.data.dev, &out.data.test}) {
    for (const auto& s : *split) validate_sample(s, out.target.alphabet.size());
  }
  return out;
}

json dataset_manifest(const Target& target, const TargetSpec& spec, const DatasetBundle& data) {
  json m;
  m["target"] = target.name;
  m["alphabet"] = target.alphabet.names();
  m["target_minimal_states"] = target.minimal_states;
  if (target.dfa) m["target_dfa"] = dfa_to_json(*target.dfa);
  json t;
  switch (spec.kind) {
    case TargetSpec::Kind::kTomita:
      t = {{"kind", "tomita"}, {"index", spec.tomita}};
      break;
    case TargetSpec::Kind::kRandom:
      t = {{"kind", "random"},
           {"states", spec.random_states},
           {"symbols", spec.random_symbols},
           {"seed", spec.random_seed}};
      break;
    case TargetSpec::Kind::kDfaFile:
      t = {{"kind", "dfa-file"}, {"path", spec.path}};
      break;
  }
  m["target_spec"] = t;
  m["dataset"] = data.metadata;
  return m;
}

TraceMode data_mode(const Samples& train) {
  return !train.empty() && train.front().mode == TraceMode::kBelief ? TraceMode::kBelief
                                                                    : TraceMode::kCrisp;
}

// ---------------------------------------------------------------------------
// Commands

struct GenDfaArgs {
  std::size_t states = 0;
  std::size_t symbols = 2;
  std::uint64_t seed = 0;
  std::string output;
};

int cmd_gen_dfa(const GenDfaArgs& a, const fs::path& out_dir) {
  const Dfa dfa = random_dfa(a.states, Alphabet(a.symbols), a.seed);
  const std::string stem = "dfa-Q" + std::to_string(a.states) + "-P" +
                           std::to_string(a.symbols) + "-s" + std::to_string(a.seed);
  const fs::path path = a.output.empty() ? out_dir / (stem + ".json") : fs::path(a.output);
  write_text(path, dfa_to_json_text(dfa));
  fs::path manifest_path = path;
  manifest_path.replace_extension(".manifest.json");
  const json manifest = {
      {"command", "gen-dfa"},
      {"states", a.states},
      {"symbols", a.symbols},
      {"seed", a.seed},
      {"minimized_states", hopcroft_minimize(trim_unreachable(dfa)).num_states()},
      {"file", path.filename().string()}};
  write_text(manifest_path, dump(manifest));
  std::cout << path.string() << " (" << manifest["minimized_states"].get<std::size_t>()
            << " states after minimization)\n";
  return kOk;
}

int cmd_gen_data(const TargetArgs& t, const DataArgs& d, const fs::path& out_dir) {
  const TargetSpec spec = t.spec();
  const Target target = resolve_target(spec);
  const DatasetBundle data = build_dataset(target, spec, d.params());
  json manifest = dataset_manifest(target, spec, data);
  manifest["command"] = "gen-data";
  save_dataset(out_dir, data, manifest);
  std::cout << out_dir.string() << ": " << data.train.size() << "/" << data.dev.size() << "/"
            << data.test.size() << " traces for " << target.name << "\n";
  return kOk;
}

struct TrainArgs {
  std::size_t q_max = 10;
  std::uint64_t seed = 0;
  std::string data_dir;
  std::string resume;
  std::size_t stop_after = 0;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, const TargetArgs& t, const DataArgs& d, const ModelArgs& m,
              const fs::path& out_dir) {
  LoadedData loaded;
  if (!a.data_dir.empty()) {
    if (t.given()) throw CLI::ValidationError("--data", "cannot be combined with a target");
    loaded = load_dataset(a.data_dir);
  } else {
    const TargetSpec spec = t.spec();
    loaded.target = resolve_target(spec);
    loaded.data = build_dataset(loaded.target, spec, d.params());
    json manifest = dataset_manifest(loaded.target, spec, loaded.data);
    manifest["command"] = "train";
    save_dataset(out_dir / "data", loaded.data, manifest);
  }

  RunSpec run;
  TrainOptions options;
  if (!a.resume.empty()) {
    Checkpoint ckpt = load_checkpoint(a.resume);
    if (ckpt.alphabet.size() != loaded.target.alphabet.size()) {
      throw InputError("checkpoint alphabet does not match the dataset");
    }
    run.q_max = ckpt.params.q_max();
    run.train = ckpt.config;
    run.schedule = ckpt.schedule;
    options.resume = std::move(ckpt);
  } else {
    run.q_max = a.q_max;
    run.train = m.train;
    run.train.seed = a.seed;
    run.schedule = m.schedule;
    run.train.mode = data_mode(loaded.data.train);
  }
  if (a.stop_after) options.stop_after = a.stop_after;
  if (!a.quiet) {
    options.on_epoch = [](const EpochRecord& r) {
      if (r.epoch % 10 == 0) {
        std::fprintf(stderr, "epoch %zu tau %.4f loss %.5f acc %.4f/%.4f dev %.4f/%.4f\n",
                     r.epoch, r.tau, r.train_loss, r.train_acc, r.train_acc_discrete,
                     r.dev_acc, r.dev_acc_discrete);
      }
    };
  }

  const RunOutcome out = run_training(loaded.target, loaded.data, run, options);
  fs::create_directories(out_dir);
  save_checkpoint((out_dir / "checkpoint.json").string(), out.checkpoint);
  write_text(out_dir / "history.csv", history_csv(out.checkpoint.history));
  if (!out.checkpoint.finished) {
    std::cout << "stopped after epoch " << out.checkpoint.epoch << "; resume with --resume "
              << (out_dir / "checkpoint.json").string() << "\n";
    return kOk;
  }
  write_text(out_dir / "report.json", dump(report_to_json(out.report)));
  write_text(out_dir / "dfa.json", dfa_to_json_text(out.extracted));
  write_text(out_dir / "dfa.dot", export_dot(out.extracted));
  const auto& r = out.report;
  std::cout << r.target << " q_max=" << r.q_max << ": test " << fixed(r.test_acc_dfa)
            << " (continuous " << fixed(r.test_acc) << "), |Q| = " << r.q_hat
            << ", #W = " << r.weights << ", " << r.epochs << " epochs, "
            << fixed(r.seconds, 1) << " s\n";
  return kOk;
}

struct ExportArgs {
  std::string checkpoint;
  std::string data_dir;
  bool no_minimize = false;
  std::string name = "dfa";
};

int cmd_export(const ExportArgs& a, const fs::path& out_dir) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  Dfa dfa = extract_dfa(ckpt.params, ckpt.alphabet, /*minimize=*/false);
  if (!a.no_minimize) {
    bool has_empty = false;
    if (!a.data_dir.empty()) {
      for (const auto& s : load_split(a.data_dir, "train")) has_empty |= s.length() == 0;
    }
    dfa = settle_empty_string(dfa, has_empty);
  }
  write_text(out_dir / (a.name + ".json"), dfa_to_json_text(dfa));
  write_text(out_dir / (a.name + ".dot"), export_dot(dfa));
  std::cout << (out_dir / a.name).string() << ".{json,dot}: " << dfa.num_states()
            << " states\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// Benchmarks

struct BenchArgs {
  std::string suite;
  std::size_t seeds = 0;  // 0 = suite default
  std::vector<std::size_t> qmax;
  std::vector<int> langs;
  std::size_t jobs = 1;
  std::uint64_t root_seed = 1;
  std::size_t targets = 3;
  std::size_t states = 10;
  std::size_t symbols = 2;
  std::size_t best_k = 5;
  std::vector<double> rates = {0.0, 0.05, 0.10, 0.15};
  std::vector<double> variances = {0.1, 0.3};
};

// One group of runs sharing a dataset and a model size.
struct Cell {
  std::string label;  // row key in the aggregate table
  Target target;
  std::shared_ptr<const DatasetBundle> data;
  RunSpec run;
  json extra;  // columns specific to the suite
};

struct CellResult {
  const Cell* cell = nullptr;
  std::vector<RunReport> runs;
  std::size_t failed = 0;
};

std::vector<CellResult> run_cells(const std::vector<Cell>& cells, std::size_t seeds,
                                  std::uint64_t root, std::size_t jobs) {
  std::vector<std::function<RunReport()>> work;
  std::mutex log_mutex;
  for (const auto& cell : cells) {
    for (std::size_t i = 0; i < seeds; ++i) {
      work.push_back([&cell, i, root, &log_mutex] {
        RunSpec run = cell.run;
        run.train.seed = run_seed(root, i);
        RunReport r = run_training(cell.target, *cell.data, run).report;
        r.config["cell"] = cell.label;
        std::lock_guard lock(log_mutex);
        std::fprintf(stderr, "%s seed#%zu: test %.4f |Q| %zu (%.1f s)\n", cell.label.c_str(),
                     i, r.test_acc_dfa, r.q_hat, r.seconds);
        return r;
      });
    }
  }
  const std::vector<RunReport> reports = run_parallel(work, jobs);
  std::vector<CellResult> out;
  std::size_t k = 0;
  for (const auto& cell : cells) {
    CellResult c;
    c.cell = &cell;
    for (std::size_t i = 0; i < seeds; ++i, ++k) {
      RunReport r = reports[k];
      if (r.status != "ok") {
        ++c.failed;
        r.target = cell.target.name;
        r.q_max = cell.run.q_max;
        r.seed = run_seed(root, i);
        std::fprintf(stderr, "%s seed#%zu failed: %s\n", cell.label.c_str(), i,
                     r.error.c_str());
      }
      c.runs.push_back(std::move(r));
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<RunReport> ok_runs(const CellResult& c) {
  std::vector<RunReport> ok;
  for (const auto& r : c.runs) {
    if (r.status == "ok") ok.push_back(r);
  }
  return ok;
}

template <typename F>
std::vector<double> column(const std::vector<RunReport>& runs, F f) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(f(r));
  return v;
}

std::shared_ptr<const DatasetBundle> make_data(const Target& target, const TargetSpec& spec,
                                               DatasetParams params, std::uint64_t root) {
  params.seed = dataset_seed(root, target.name);
  return std::make_shared<const DatasetBundle>(build_dataset(target, spec, params));
}

RunSpec base_run(const ModelArgs& m, std::size_t q_max) {
  RunSpec run;
  run.q_max = q_max;
  run.train = m.train;
  run.schedule = m.schedule;
  return run;
}

std::vector<int> languages(const BenchArgs& a, std::vector<int> fallback) {
  return a.langs.empty() ? fallback : a.langs;
}

int cmd_bench(const BenchArgs& a, const DataArgs& d, const ModelArgs& m, const fs::path& dir) {
  std::vector<Cell> cells;
  std::size_t seeds = a.seeds;
  std::string header;
  std::function<std::string(const CellResult&)> row;

  auto tomita_cell = [&](int lang, std::size_t q_max, double flip, const std::string& label) {
    const TargetSpec spec = TargetSpec::tomita_language(lang);
    Cell c;
    c.target = resolve_target(spec);
    DatasetParams p = d.params();
    p.flip = flip;
    c.data = make_data(c.target, spec, p, a.root_seed);
    c.run = base_run(m, q_max);
    c.label = label;
    return c;
  };

  if (a.suite == "tomita") {
    if (!seeds) seeds = 5;
    for (int lang : languages(a, {1, 2, 3, 4, 5, 6, 7})) {
      // The noisy-data table uses a larger model for T1.
      const std::vector<std::size_t> qs =
          !a.qmax.empty() ? a.qmax
                          : std::vector<std::size_t>{d.flip > 0.0 && lang == 1 ? 30u : 10u};
      for (std::size_t q : qs) {
        cells.push_back(tomita_cell(lang, q, d.flip,
                                    "T" + std::to_string(lang) + " q" + std::to_string(q)));
      }
    }
    header =
        "target,q_max,flip,weights,runs,failed,perfect,test_acc_mean,test_acc_std,q_hat_mean,"
        "q_hat_std,seconds_mean,seconds_std,best_seed,best_test_acc,best_q_hat";
    row = [&](const CellResult& c) {
      const auto ok = ok_runs(c);
      std::size_t perfect = 0;
      for (const auto& r : ok) {
        perfect += r.test_acc_dfa == 1.0 && r.q_hat == c.cell->target.minimal_states;
      }
      std::ostringstream s;
      s << c.cell->target.name << ',' << c.cell->run.q_max << ',' << d.flip << ','
        << weight_count(c.cell->run.q_max, 2) << ',' << c.runs.size() << ',' << c.failed << ','
        << perfect;
      if (ok.empty()) return s.str() + ",,,,,,,,,";
      const auto acc = mean_std(column(ok, [](auto& r) { return r.test_acc_dfa; }));
      const auto qh = mean_std(column(ok, [](auto& r) { return double(r.q_hat); }));
      const auto sec = mean_std(column(ok, [](auto& r) { return r.seconds; }));
      const RunReport best = select_best(ok);
      s << ',' << fixed(acc.mean) << ',' << fixed(acc.stddev) << ',' << fixed(qh.mean, 2) << ','
        << fixed(qh.stddev, 2) << ',' << fixed(sec.mean, 2) << ',' << fixed(sec.stddev, 2)
        << ',' << best.seed << ',' << fixed(best.test_acc_dfa) << ',' << best.q_hat;
      return s.str();
    };
  } else if (a.suite == "random") {
    if (!seeds) seeds = 10;
    const std::size_t q = a.qmax.empty() ? 100 : a.qmax.front();
    for (std::size_t i = 0; i < a.targets; ++i) {
      const TargetSpec spec =
          TargetSpec::random(a.states, a.symbols, derive_seed(a.root_seed, "target", i));
      Cell c;
      c.target = resolve_target(spec);
      c.data = make_data(c.target, spec, d.params(), a.root_seed);
      c.run = base_run(m, q);
      c.label = c.target.name + " q" + std::to_string(q);
      cells.push_back(std::move(c));
    }
    header =
        "target,states,symbols,minimal_states,q_max,weights,k,n,failed,test_acc_mean,"
        "test_acc_std,q_hat_mean,q_hat_std,seconds_mean,seconds_std";
    row = [&](const CellResult& c) {
      const auto ok = ok_runs(c);
      std::ostringstream s;
      s << c.cell->target.name << ',' << a.states << ',' << a.symbols << ','
        << c.cell->target.minimal_states << ',' << c.cell->run.q_max << ','
        << weight_count(c.cell->run.q_max, a.symbols) << ',' << std::min(a.best_k, ok.size())
        << ',' << ok.size() << ',' << c.failed;
      if (ok.empty()) return s.str() + ",,,,,,";
      const Aggregate agg = best_k_of_n(ok, std::min(a.best_k, ok.size()));
      s << ',' << fixed(agg.test_acc.mean) << ',' << fixed(agg.test_acc.stddev) << ','
        << fixed(agg.q_hat.mean, 2) << ',' << fixed(agg.q_hat.stddev, 2) << ','
        << fixed(agg.seconds.mean, 2) << ',' << fixed(agg.seconds.stddev, 2);
      return s.str();
    };
  } else if (a.suite == "ablate-noise" || a.suite == "ablate-states") {
    if (!seeds) seeds = 5;
    const bool by_noise = a.suite == "ablate-noise";
    const int lang = languages(a, {5}).front();
    const std::vector<std::size_t> qs =
        !a.qmax.empty() ? a.qmax
                        : (by_noise ? std::vector<std::size_t>{200}
                                    : std::vector<std::size_t>{10, 30, 50, 100, 200});
    const std::vector<double> rates = by_noise ? a.rates : std::vector<double>{d.flip};
    for (std::size_t q : qs) {
      for (double rate : rates) {
        Cell c = tomita_cell(lang, q, rate,
                             "T" + std::to_string(lang) + " q" + std::to_string(q) +
                                 " flip" + fixed(rate, 2));
        c.extra = {{"flip", rate}};
        cells.push_back(std::move(c));
      }
    }
    header =
        "target,q_max,flip,weights,runs,failed,test_acc_median,q_hat_median,test_acc_mean,"
        "test_acc_std,q_hat_mean,q_hat_std,seconds_mean";
    row = [&](const CellResult& c) {
      const auto ok = ok_runs(c);
      std::ostringstream s;
      s << c.cell->target.name << ',' << c.cell->run.q_max << ','
        << fixed(c.cell->extra["flip"].get<double>(), 2) << ','
        << weight_count(c.cell->run.q_max, 2) << ',' << c.runs.size() << ',' << c.failed;
      if (ok.empty()) return s.str() + ",,,,,,,";
      const auto acc = column(ok, [](auto& r) { return r.test_acc_dfa; });
      const auto qh = column(ok, [](auto& r) { return double(r.q_hat); });
      const auto a_ms = mean_std(acc);
      const auto q_ms = mean_std(qh);
      s << ',' << fixed(median(acc)) << ',' << fixed(median(qh), 1) << ',' << fixed(a_ms.mean)
        << ',' << fixed(a_ms.stddev) << ',' << fixed(q_ms.mean, 2) << ','
        << fixed(q_ms.stddev, 2) << ','
        << fixed(mean_std(column(ok, [](auto& r) { return r.seconds; })).mean, 2);
      return s.str();
    };
  } else if (a.suite == "symbol-noise") {
    if (!seeds) seeds = 5;
    const int lang = languages(a, {4}).front();
    const std::size_t q = a.qmax.empty() ? 10 : a.qmax.front();
    const TargetSpec spec = TargetSpec::tomita_language(lang);
    for (double variance : a.variances) {
      Cell belief;
      belief.target = resolve_target(spec);
      DatasetParams p = d.params();
      p.symbol_noise = variance;
      belief.data = make_data(belief.target, spec, p, a.root_seed);
      belief.run = base_run(m, q);
      belief.run.train.mode = TraceMode::kBelief;
      belief.label = "T" + std::to_string(lang) + " var" + fixed(variance, 2) + " belief";
      belief.extra = {{"variance", variance}, {"arm", "belief"}};

      Cell nearest = belief;
      DatasetBundle discrete = *belief.data;
      discrete.train = discretize(discrete.train);
      discrete.dev = discretize(discrete.dev);
      discrete.test = discretize(discrete.test);
      discrete.metadata["discretized"] = "nearest one-hot";
      nearest.data = std::make_shared<const DatasetBundle>(std::move(discrete));
      nearest.run.train.mode = TraceMode::kCrisp;
      nearest.label = "T" + std::to_string(lang) + " var" + fixed(variance, 2) + " nearest";
      nearest.extra = {{"variance", variance}, {"arm", "nearest-one-hot"}};
      cells.push_back(std::move(belief));
      cells.push_back(std::move(nearest));
    }
    header = "target,variance,arm,q_max,runs,failed,test_acc_mean,test_acc_std,q_hat_mean,test_acc_per_seed";
    row = [&](const CellResult& c) {
      const auto ok = ok_runs(c);
      std::ostringstream s;
      s << c.cell->target.name << ',' << fixed(c.cell->extra["variance"].get<double>(), 2)
        << ',' << c.cell->extra["arm"].get<std::string>() << ',' << c.cell->run.q_max << ','
        << c.runs.size() << ',' << c.failed;
      if (ok.empty()) return s.str() + ",,,,";
      const auto acc = column(ok, [](auto& r) { return r.test_acc_dfa; });
      const auto ms = mean_std(acc);
      s << ',' << fixed(ms.mean) << ',' << fixed(ms.stddev) << ','
        << fixed(mean_std(column(ok, [](auto& r) { return double(r.q_hat); })).mean, 2) << ','
        << csv_doubles(acc);
      return s.str();
    };
  } else {
    throw CLI::ValidationError("suite", "unknown suite " + a.suite);
  }

  const std::vector<CellResult> results = run_cells(cells, seeds, a.root_seed, a.jobs);
  std::vector<RunReport> all;
  std::string reports_jsonl;
  std::string table = header + "\n";
  std::size_t failed = 0;
  for (const auto& c : results) {
    table += row(c) + "\n";
    failed += c.failed;
    for (const auto& r : c.runs) {
      all.push_back(r);
      reports_jsonl += report_to_json(r).dump() + "\n";
    }
  }
  fs::create_directories(dir);
  write_text(dir / "runs.csv", runs_csv(all));
  write_text(dir / "reports.jsonl", reports_jsonl);
  write_text(dir / "table.csv", table);
  json manifest = {{"command", "bench"},
                   {"suite", a.suite},
                   {"seeds", seeds},
                   {"root_seed", a.root_seed},
                   {"flip", d.flip},
                   {"train", config_to_json(m.train)},
                   {"schedule", schedule_to_json(m.schedule)},
                   {"run_seed_derivation", "derive_seed(root_seed, \"run\", i)"},
                   {"dataset_seed_derivation", "dataset_seed(root_seed, target name)"},
                   {"failed_runs", failed}};
  write_text(dir / "manifest.json", dump(manifest));
  std::cout << table;
  return failed ? kPartial : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn DFAs by annealing a differentiable automaton"};
  app.set_config("--config", "", "TOML file with option values (flags take precedence)");
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_dir = default_out_dir();
  app.add_option("-o,--out", out_dir, "Output directory (default $DEEPDFA_OUT or ./deepdfa-out)");

  GenDfaArgs gen_dfa;
  auto* c_gen_dfa = app.add_subcommand("gen-dfa", "Generate a random target DFA");
  c_gen_dfa->add_option("--states", gen_dfa.states, "Number of states")
      ->required()
      ->check(kAtLeastOne);
  c_gen_dfa->add_option("--symbols", gen_dfa.symbols, "Alphabet size")->check(kAtLeastOne);
  c_gen_dfa->add_option("--seed", gen_dfa.seed, "Generator seed");
  c_gen_dfa->add_option("--output", gen_dfa.output, "DFA file (default in the output directory)");

  TargetArgs data_target;
  DataArgs data_args;
  auto* c_gen_data = app.add_subcommand("gen-data", "Generate train/dev/test traces");
  data_target.add(c_gen_data);
  data_args.add(c_gen_data);

  TrainArgs train_args;
  TargetArgs train_target;
  DataArgs train_data;
  ModelArgs train_model;
  auto* c_train = app.add_subcommand("train", "Train one model and extract its DFA");
  c_train->add_option("--qmax", train_args.q_max, "Hypothesis state count")
      ->check(kAtLeastOne);
  c_train->add_option("--seed", train_args.seed, "Initialization and shuffling seed");
  c_train->add_option("--data", train_args.data_dir, "Dataset directory written by gen-data");
  c_train->add_option("--resume", train_args.resume, "Continue from a checkpoint");
  c_train->add_option("--stop-after", train_args.stop_after,
                      "Stop (resumably) after this many epochs in total");
  c_train->add_flag("-q,--quiet", train_args.quiet, "No per-epoch progress");
  train_target.add(c_train);
  train_data.add(c_train);
  train_model.add(c_train);

  BenchArgs bench;
  DataArgs bench_data;
  ModelArgs bench_model;
  auto* c_bench = app.add_subcommand("bench", "Run a benchmark sweep");
  c_bench->add_option("suite", bench.suite, "tomita | random | ablate-noise | ablate-states | symbol-noise")
      ->required()
      ->check(CLI::IsMember({"tomita", "random", "ablate-noise", "ablate-states", "symbol-noise"}));
  c_bench->add_option("--seeds", bench.seeds, "Runs per cell (default 5; 10 for random)");
  c_bench->add_option("--qmax", bench.qmax, "Hypothesis state counts");
  c_bench->add_option("--lang", bench.langs, "Tomita languages")->check(CLI::Range(1, 7));
  c_bench->add_option("--jobs", bench.jobs, "Worker threads (0 = all cores)");
  c_bench->add_option("--root-seed", bench.root_seed, "Root of all derived seeds");
  c_bench->add_option("--targets", bench.targets, "Random targets");
  c_bench->add_option("--states", bench.states, "States of random targets")
      ->check(kAtLeastOne);
  c_bench->add_option("--symbols", bench.symbols, "Alphabet size of random targets")
      ->check(kAtLeastOne);
  c_bench->add_option("--best-k", bench.best_k, "Runs kept per random target")
      ->check(kAtLeastOne);
  c_bench->add_option("--rates", bench.rates, "Flip rates for ablate-noise");
  c_bench->add_option("--variances", bench.variances, "Symbol-noise variances");
  bench_data.add(c_bench);
  bench_model.add(c_bench);

  ExportArgs export_args;
  auto* c_export = app.add_subcommand("export", "Write a checkpoint's DFA as DOT and JSON");
  c_export->add_option("--checkpoint", export_args.checkpoint, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  c_export->add_option("--data", export_args.data_dir,
                       "Dataset directory, to read whether the empty trace was labeled");
  c_export->add_flag("--no-minimize", export_args.no_minimize,
                     "Keep the reachable part of the argmax automaton as is");
  c_export->add_option("--name", export_args.name, "Output file stem");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const fs::path out = out_dir;
    if (*c_gen_dfa) return cmd_gen_dfa(gen_dfa, out);
    if (*c_gen_data) return cmd_gen_data(data_target, data_args, out);
    if (*c_train) return cmd_train(train_args, train_target, train_data, train_model, out);
    if (*c_bench) {
      return cmd_bench(bench, bench_data, bench_model, out / ("bench-" + bench.suite));
    }
    if (*c_export) return cmd_export(export_args, out);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
