/* Copyright 2026 The sigrnn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// The `sigrnn` command line: train, eval, gradcheck, sigdump and bench.
// Everything runs in-process through cli::run so the tests can drive it.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sigrnn/data.hpp"
#include "sigrnn/errors.hpp"
#include "sigrnn/model.hpp"
#include "sigrnn/signature.hpp"
#include "sigrnn/training.hpp"

namespace sigrnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitVerify = 3;

// Thrown for a failed verification (exit code 3).
class VerificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Run configuration: `key=value` lines, '#' comments.

struct ConfigKey {
  const char* name;
  const char* fallback;
  const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"task", "", "volume | abs_returns | minmax (default: minmax for synth, volume for csv)"},
      {"data", "", "input CSV (timestamp column plus named series)"},
      {"synth", "", "synthetic series: ar1 | levy_area | lagged_mean"},
      {"synth_n", "2000", "rows of synthetic data"},
      {"data_seed", "1", "seed of the synthetic generator"},
      {"target", "", "target column (default: first series column)"},
      {"missing", "reject", "reject | ffill"},
      {"model", "gru", "variant: lstm, gru, lstm-3, sig_lstm-2, sig_gru-3-2, ..."},
      {"hidden", "100", "hidden width of every layer"},
      {"proj", "5", "signature projection dimension (5 or 10)"},
      {"flatten", "false", "feed the flattened hidden sequence to the head"},
      {"layers", "1", "layer count of a baseline variant without suffix"},
      {"horizon", "1", "prediction horizon h (window length max(45, 5h))"},
      {"median_window", "336", "moving-median window (samples)"},
      {"alignment", "exclusive", "moving-median window end: exclusive | inclusive"},
      {"returns", "simple", "absolute returns: simple | log"},
      {"val_fraction", "0.2", "validation share of the non-test windows"},
      {"test_fraction", "0.2", "trailing test share of all windows"},
      {"batch_size", "128", "mini-batch size"},
      {"max_epochs", "1000", "epoch cap"},
      {"early_stopping", "true", "stop after `patience` epochs without improvement"},
      {"patience", "10", "early-stopping patience (epochs)"},
      {"min_delta", "1e-5", "minimum validation-loss decrease counted as improvement"},
      {"lr", "1e-3", "initial Adam learning rate"},
      {"plateau_factor", "0.25", "learning-rate multiplier on a plateau"},
      {"plateau_patience", "5", "plateau patience (epochs)"},
      {"lr_min", "2.5e-5", "learning-rate floor"},
      {"seed", "1", "model and shuffling seed (repeat k uses seed + k)"},
      {"repeats", "1", "number of seeds to train"},
      {"out_dir", "runs", "parent directory of run directories"},
  };
  return keys;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.name] = k.fallback;
  }

  static bool known(const std::string& key) {
    for (const auto& k : config_keys()) {
      if (key == k.name) return true;
    }
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }

  std::size_t count(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t pos = 0;
      const long long n = std::stoll(v, &pos);
      if (pos == v.size() && n >= 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }

  double real(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos == v.size() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }

  bool flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
  }

  void parse(std::istream& in, const std::string& origin) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(n) + ": expected key=value");
      const std::string key = detail::trim(line.substr(0, eq));
      if (!known(key)) throw ConfigError(origin + ":" + std::to_string(n) + ": unknown config key '" + key + "'");
      values_[key] = detail::trim(line.substr(eq + 1));
    }
  }

  void load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    parse(f, path);
  }

  // Fills derived defaults and checks every value parses.
  void resolve() {
    if (str("data").empty() == str("synth").empty()) {
      throw ConfigError("exactly one of 'data' and 'synth' must be set");
    }
    if (str("task").empty()) values_["task"] = str("synth").empty() ? "volume" : "minmax";
    task_from_string(str("task"));
    if (!str("synth").empty()) synth_kind_from_string(str("synth"));
    if (str("missing") != "reject" && str("missing") != "ffill") {
      throw ConfigError("config key 'missing': expected reject or ffill");
    }
    if (str("alignment") != "exclusive" && str("alignment") != "inclusive") {
      throw ConfigError("config key 'alignment': expected exclusive or inclusive");
    }
    if (str("returns") != "simple" && str("returns") != "log") {
      throw ConfigError("config key 'returns': expected simple or log");
    }
    for (const char* k : {"synth_n", "data_seed", "hidden", "proj", "layers", "horizon", "median_window",
                          "batch_size", "max_epochs", "patience", "plateau_patience", "seed", "repeats"}) {
      count(k);
    }
    for (const char* k : {"val_fraction", "test_fraction", "min_delta", "lr", "plateau_factor", "lr_min"}) real(k);
    flag("flatten");
    flag("early_stopping");
    if (count("repeats") < 1) throw ConfigError("config key 'repeats' must be >= 1");
    if (count("hidden") < 1) throw ConfigError("config key 'hidden' must be >= 1");
    train_config(0).validate();
  }

  std::string to_text() const {
    std::string out;
    for (const auto& k : config_keys()) out += std::string(k.name) + "=" + str(k.name) + "\n";
    return out;
  }

  TrainConfig train_config(std::uint64_t seed) const {
    TrainConfig t;
    t.batch_size = count("batch_size");
    t.max_epochs = count("max_epochs");
    t.early_stopping = flag("early_stopping");
    t.early_stop_patience = count("patience");
    t.early_stop_min_delta = real("min_delta");
    t.lr_init = real("lr");
    t.plateau_factor = real("plateau_factor");
    t.plateau_patience = count("plateau_patience");
    t.lr_min = real("lr_min");
    t.val_fraction = real("val_fraction");
    t.seed = seed;
    return t;
  }

  PreprocessSpec preprocess() const {
    PreprocessSpec p;
    p.task = task_from_string(str("task"));
    p.median_window = count("median_window");
    p.horizon = count("horizon");
    p.target_column = str("target");
    p.val_fraction = real("val_fraction");
    p.test_fraction = real("test_fraction");
    p.alignment = str("alignment") == "inclusive" ? MedianAlignment::inclusive : MedianAlignment::exclusive;
    p.returns = str("returns") == "log" ? ReturnKind::log : ReturnKind::simple;
    return p;
  }

 private:
  std::map<std::string, std::string> values_;
};

inline SeriesFrame load_frame(const RunConfig& cfg) {
  if (!cfg.str("synth").empty()) {
    return synth_generate(synth_kind_from_string(cfg.str("synth")), cfg.count("synth_n"), cfg.count("data_seed"));
  }
  return read_csv(cfg.str("data"),
                  cfg.str("missing") == "ffill" ? MissingPolicy::forward_fill : MissingPolicy::reject);
}

inline WindowedDataset load_dataset(const RunConfig& cfg) { return window_sequences(load_frame(cfg), cfg.preprocess()); }

inline ModelConfig model_config(const RunConfig& cfg, const WindowedDataset& ds) {
  const std::size_t proj = cfg.count("proj");
  const std::string& variant = cfg.str("model");
  if (variant.rfind("sig_", 0) == 0 && proj != 5 && proj != 10) {
    throw ConfigError("config key 'proj': projection dimension must be 5 or 10, got " + std::to_string(proj));
  }
  return parse_variant(variant, ds.features.size(), ds.seq_len, cfg.count("hidden"), proj, cfg.flag("flatten"),
                       cfg.count("layers"));
}

struct SplitMetrics {
  double r2 = std::nan("");
  double mse = std::nan("");
};

inline SplitMetrics evaluate(const Model& model, const WindowedDataset& ds, const std::string& split) {
  const auto& idx = ds.split(split);
  SplitMetrics m;
  if (idx.empty()) return m;
  const Vec pred = predict_indices(model, ds.x, idx);
  const Vec truth = gather(ds.y, idx);
  m.mse = mse_loss(pred, truth);
  m.r2 = idx.size() >= 2 ? r2_score(pred, truth) : std::nan("");
  return m;
}

inline void check_compatible(const Model& model, const WindowedDataset& ds) {
  const ModelConfig& mc = model.config();
  if (mc.input_dim != ds.features.size() || mc.seq_len != ds.seq_len) {
    throw IntegrityError("checkpoint/config mismatch: checkpoint expects " + std::to_string(mc.input_dim) +
                         " features x " + std::to_string(mc.seq_len) + " steps, data gives " +
                         std::to_string(ds.features.size()) + " x " + std::to_string(ds.seq_len));
  }
}

// out_dir/<model>-<UTC stamp>-seed<seed>[-k], never an existing directory.
inline std::filesystem::path make_run_dir(const RunConfig& cfg) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  const std::string base = cfg.str("model") + "-" + stamp + "-seed" + cfg.str("seed");
  const std::filesystem::path parent(cfg.str("out_dir"));
  std::filesystem::create_directories(parent);
  for (int k = 1;; ++k) {
    const auto dir = parent / (k == 1 ? base : base + "-" + std::to_string(k));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text)) throw DataError("cannot write '" + path.string() + "'");
}

struct RunMetrics {
  std::uint64_t seed = 0;
  SplitMetrics train, val, test;
  std::size_t best_epoch = 0, epochs = 0;
  double seconds = 0.0;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1).
inline double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline std::string metrics_csv(const std::vector<RunMetrics>& runs) {
  std::string out = "seed,train_r2,val_r2,test_r2,test_mse,best_epoch,epochs,seconds\n";
  for (const auto& r : runs) {
    out += std::to_string(r.seed) + "," + fmt(r.train.r2) + "," + fmt(r.val.r2) + "," + fmt(r.test.r2) + "," +
           fmt(r.test.mse) + "," + std::to_string(r.best_epoch) + "," + std::to_string(r.epochs) + "," +
           fmt(r.seconds) + "\n";
  }
  if (runs.size() > 1) {
    std::vector<std::vector<double>> cols(7);
    for (const auto& r : runs) {
      const double row[7] = {r.train.r2, r.val.r2, r.test.r2, r.test.mse, static_cast<double>(r.best_epoch),
                             static_cast<double>(r.epochs), r.seconds};
      for (int c = 0; c < 7; ++c) cols[c].push_back(row[c]);
    }
    for (const bool want_std : {false, true}) {
      out += want_std ? "std" : "mean";
      for (const auto& c : cols) out += "," + fmt(want_std ? std_of(c) : mean_of(c));
      out += "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_train(RunConfig cfg, bool verbose, std::ostream& out) {
  cfg.resolve();
  const WindowedDataset ds = load_dataset(cfg);
  const ModelConfig mc = model_config(cfg, ds);
  const auto dir = make_run_dir(cfg);
  write_text(dir / "config.txt", cfg.to_text());
  const std::size_t repeats = cfg.count("repeats");
  std::vector<RunMetrics> runs;
  for (std::size_t k = 0; k < repeats; ++k) {
    const std::uint64_t seed = cfg.count("seed") + k;
    const auto run_dir = repeats == 1 ? dir : dir / ("seed-" + std::to_string(seed));
    std::filesystem::create_directories(run_dir);
    Model model(mc, seed);
    const auto started = std::chrono::steady_clock::now();
    const FitResult fr = fit(model, ds.x, ds.y, ds.train, ds.val, cfg.train_config(seed));
    RunMetrics r;
    r.seed = seed;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    r.best_epoch = fr.best_epoch;
    r.epochs = fr.history.size();
    r.train = evaluate(model, ds, "train");
    r.val = evaluate(model, ds, "val");
    r.test = evaluate(model, ds, "test");
    save_checkpoint((run_dir / "model.ckpt").string(), model, &fr.adam);
    write_history_csv((run_dir / "history.csv").string(), fr.history);
    if (verbose) {
      for (const auto& e : fr.history) {
        out << "epoch " << e.epoch << " train " << fmt(e.train_loss) << " val " << fmt(e.val_loss) << " lr "
            << e.lr << "\n";
      }
    }
    out << "seed " << seed << ": epochs " << r.epochs << " (best " << r.best_epoch << "), train R2 "
        << fixed(r.train.r2, 4) << ", val R2 " << fixed(r.val.r2, 4) << ", test R2 " << fmt(r.test.r2) << "\n";
    runs.push_back(r);
  }
  write_text(dir / "metrics.csv", metrics_csv(runs));
  if (runs.size() > 1) {
    std::vector<double> r2;
    for (const auto& r : runs) r2.push_back(r.test.r2);
    out << "| Model | Test R2 (mean) | Test R2 (std) |\n|---|---|---|\n| " << cfg.str("model") << " | "
        << fixed(mean_of(r2), 4) << " | " << fixed(std_of(r2), 4) << " |\n";
  }
  out << "run directory: " << dir.string() << "\n";
  return kExitOk;
}

inline int cmd_eval(const std::string& checkpoint, RunConfig cfg, const std::string& split,
                    const std::string& out_path, std::ostream& out) {
  cfg.resolve();
  const Checkpoint ck = load_checkpoint(checkpoint);
  const WindowedDataset ds = load_dataset(cfg);
  check_compatible(ck.model, ds);
  const SplitMetrics m = evaluate(ck.model, ds, split);
  const std::string text = "split,r2,mse\n" + split + "," + fmt(m.r2) + "," + fmt(m.mse) + "\n";
  out << text;
  const std::filesystem::path target =
      out_path.empty() ? std::filesystem::path(checkpoint).parent_path() / ("eval-" + split + ".csv")
                       : std::filesystem::path(out_path);
  write_text(target, text);
  return kExitOk;
}

inline int cmd_gradcheck(const std::string& variant, std::uint64_t seed, bool flatten, double eps,
                         const std::string& corrupt_block, std::ostream& out) {
  const ModelConfig mc = parse_variant(variant, 4, 6, 3, 3, flatten);
  Model model(mc, seed);
  RngStream rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Tensor3 x(2, 6, 4);
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
  Vec y(2);
  for (double& v : y) v = rng.uniform(-1.0, 1.0);
  std::function<void(Gradients&)> tamper;
  if (!corrupt_block.empty()) {
    model.params().index_of(corrupt_block);  // validates the name
    tamper = [&](Gradients& g) { g.value(g.index_of(corrupt_block)).values()[0] += 1.0; };
  }
  const auto errs = gradient_check(model, x, y, eps, tamper);
  out << "block,max_rel_error\n";
  const BlockError* worst = &errs.front();
  for (const auto& e : errs) {
    out << e.name << "," << fmt(e.max_rel_error) << "\n";
    if (e.max_rel_error > worst->max_rel_error) worst = &e;
  }
  if (worst->max_rel_error > 1e-4) {
    throw VerificationError("gradient check failed: worst block '" + worst->name + "' has relative error " +
                            fmt(worst->max_rel_error) + " > 1e-4");
  }
  out << "ok: worst block " << worst->name << " " << fmt(worst->max_rel_error) << "\n";
  return kExitOk;
}

// CSV rows `t,level,index,value`: t is 1-based, index is the 0-based
// row-major position of the word within its level.
inline void write_sigdump(std::ostream& out, const SignatureStream& s) {
  out << "t,level,index,value\n";
  for (std::size_t t = 0; t < s.length(); ++t) {
    const auto step = s.at(t);
    for (std::size_t k = 1; k <= s.spec.depth; ++k) {
      const auto level = step.level(k);
      for (std::size_t i = 0; i < level.size(); ++i) {
        out << t + 1 << "," << k << "," << i << "," << fmt(level[i]) << "\n";
      }
    }
  }
}

inline int cmd_sigdump(const std::string& csv, std::size_t depth, std::size_t proj, std::uint64_t seed,
                       bool normalize, const std::string& out_path, std::ostream& out) {
  if (depth < 1 || depth > kMaxSignatureDepth) {
    throw ConfigError("sigdump: depth must be between 1 and " + std::to_string(kMaxSignatureDepth) + ", got " +
                      std::to_string(depth));
  }
  const SeriesFrame f = read_csv(csv);
  Tensor3 path(1, f.rows(), f.columns.size());
  for (std::size_t t = 0; t < f.rows(); ++t)
    for (std::size_t c = 0; c < f.columns.size(); ++c) path(0, t, c) = f.columns[c][t];
  if (proj > 0) {
    RngStream rng(seed);
    path = project_input(path, ProjectionParams{glorot_uniform(rng, proj, f.columns.size())});
  }
  const SigSpec spec(path.features(), depth);
  spec.validate();
  SignatureStream s = std::move(stream_signature(path, spec).front());
  if (normalize) s = time_normalize(s);
  if (out_path.empty()) {
    write_sigdump(out, s);
  } else {
    std::ofstream file(out_path, std::ios::trunc);
    if (!file) throw DataError("cannot write '" + out_path + "'");
    write_sigdump(file, s);
  }
  return kExitOk;
}

inline std::string baseline_of(const std::string& variant) {
  if (variant.rfind("sig_lstm", 0) == 0) return "lstm";
  if (variant.rfind("sig_gru", 0) == 0) return "gru";
  return "";
}

struct BenchRow {
  std::string variant;
  std::size_t epochs = 0;
  double per_epoch = 0.0;
  double total = 0.0;
};

inline int cmd_bench(const std::vector<std::string>& variants, RunConfig cfg, std::size_t epochs,
                     const std::string& out_path, std::ostream& out) {
  cfg.set("early_stopping", "false");
  cfg.set("max_epochs", std::to_string(epochs));
  cfg.resolve();
  const WindowedDataset ds = load_dataset(cfg);
  std::vector<BenchRow> rows;
  for (const auto& v : variants) {
    cfg.set("model", v);
    Model model(model_config(cfg, ds), cfg.count("seed"));
    const FitResult fr = fit(model, ds.x, ds.y, ds.train, ds.val, cfg.train_config(cfg.count("seed")));
    BenchRow r{v, fr.history.size(), 0.0, 0.0};
    for (const auto& e : fr.history) r.total += e.seconds;
    r.per_epoch = r.total / static_cast<double>(r.epochs);
    rows.push_back(r);
  }
  auto ratio = [&](const BenchRow& r) {
    const std::string base = baseline_of(r.variant);
    for (const auto& b : rows) {
      if (b.variant == base) return r.per_epoch / b.per_epoch;
    }
    return std::nan("");
  };
  out << "| Model | Epochs | Seconds / epoch | Total seconds | vs baseline |\n|---|---|---|---|---|\n";
  std::string csv = "variant,epochs,seconds_per_epoch,total_seconds,ratio_to_baseline\n";
  for (const auto& r : rows) {
    const double q = ratio(r);
    out << "| " << r.variant << " | " << r.epochs << " | " << fixed(r.per_epoch, 4) << " | " << fixed(r.total, 3)
        << " | " << (std::isnan(q) ? std::string("-") : fixed(q, 2) + "x") << " |\n";
    csv += r.variant + "," + std::to_string(r.epochs) + "," + fmt(r.per_epoch) + "," + fmt(r.total) + "," +
           (std::isnan(q) ? std::string("") : fmt(q)) + "\n";
  }
  if (!out_path.empty()) write_text(out_path, csv);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument parsing

inline std::string key_help() {
  std::string s = "Run configuration keys (config file lines `key=value`, or --key value):\n";
  for (const auto& k : config_keys()) {
    s += "  " + std::string(k.name) + " [" + (k.fallback[0] ? k.fallback : "unset") + "]  " + k.help + "\n";
  }
  return s;
}

// Registers --<key> for every run-config key; values land in `sink` and a
// repeated flag keeps its last value.
inline void add_key_options(CLI::App& app, std::map<std::string, std::string>& sink) {
  for (const auto& k : config_keys()) {
    std::string flag = std::string("--") + k.name;
    app.add_option_function<std::string>(
        flag, [&sink, name = std::string(k.name)](const std::string& v) { sink[name] = v; }, k.help)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

inline RunConfig build_config(const std::string& file, const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  if (!file.empty()) cfg.load(file);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sigrnn: signature-gated recurrent networks"};
  app.name("sigrnn");
  app.require_subcommand(1);
  app.footer(key_help());

  std::map<std::string, std::string> overrides;
  std::string config_file, checkpoint, split = "test", out_path, corrupt_block, csv, variant, variants;
  bool verbose = false, flatten = false, no_normalize = false;
  std::uint64_t seed = 1;
  std::size_t depth = 2, proj = 0, epochs = 3;
  double eps = 1e-5;

  auto* train = app.add_subcommand("train", "train one model per seed and write its run directory");
  train->add_option("--config", config_file, "run configuration file");
  train->add_flag("--verbose", verbose, "print every epoch");
  add_key_options(*train, overrides);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--config", config_file, "run configuration (e.g. the run's config.txt)");
  eval->add_option("--split", split, "train | val | test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--out", out_path, "metrics CSV (default: eval-<split>.csv next to the checkpoint)");
  add_key_options(*eval, overrides);

  auto* grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  grad->add_option("variant", variant, "model variant")->required();
  grad->add_option("--seed", seed, "instance seed");
  grad->add_option("--eps", eps, "finite-difference step");
  grad->add_flag("--flatten", flatten, "flattened head");
  grad->add_option("--corrupt-block", corrupt_block, "perturb this block's analytic gradient (self-test)");

  auto* dump = app.add_subcommand("sigdump", "write the signature stream of a CSV path");
  dump->add_option("--csv", csv, "input CSV")->required();
  dump->add_option("--depth", depth, "truncation depth (1-4)");
  dump->add_option("--proj", proj, "random projection dimension (0 = none)");
  dump->add_option("--seed", seed, "projection seed");
  dump->add_flag("--no-normalize", no_normalize, "skip the 1/t time normalization");
  dump->add_option("--out", out_path, "output CSV (default: stdout)");

  auto* bench = app.add_subcommand("bench", "time training epochs of several variants");
  bench->add_option("--variants", variants, "comma-separated variants")->required();
  bench->add_option("--epochs", epochs, "epochs per variant")->check(CLI::PositiveNumber);
  bench->add_option("--config", config_file, "run configuration file");
  bench->add_option("--out", out_path, "timing CSV");
  add_key_options(*bench, overrides);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run 'sigrnn --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(build_config(config_file, overrides), verbose, out);
    if (eval->parsed()) return cmd_eval(checkpoint, build_config(config_file, overrides), split, out_path, out);
    if (grad->parsed()) return cmd_gradcheck(variant, seed, flatten, eps, corrupt_block, out);
    if (dump->parsed()) return cmd_sigdump(csv, depth, proj, seed, !no_normalize, out_path, out);
    if (bench->parsed()) {
      std::vector<std::string> list;
      std::stringstream ss(variants);
      for (std::string v; std::getline(ss, v, ',');) {
        if (!v.empty()) list.push_back(v);
      }
      if (list.empty()) throw ConfigError("bench: no variants given");
      return cmd_bench(list, build_config(config_file, overrides), epochs, out_path, out);
    }
  } catch (const VerificationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerify;
  } catch (const std::invalid_argument& e) {  // ConfigError, ShapeError
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {  // DataError, IntegrityError, NumericError, I/O
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace sigrnn::cli
