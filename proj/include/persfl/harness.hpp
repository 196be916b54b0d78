#pragma once

// Experiment orchestration: declarative JSON configs, repetition seeds,
// sweep execution and CSV/manifest output.
//
// A run expands into one job per (sweep value, repetition). Jobs are pure
// functions of the resolved config, so they may run on any number of threads;
// results land in fixed slots and are written in config order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "persfl/baselines.hpp"
#include "persfl/metrics.hpp"
#include "persfl/persfl_agnostic.hpp"
#include "persfl/persfl_param.hpp"
#include "persfl/synthdata.hpp"

namespace persfl {

using Json = nlohmann::ordered_json;

enum class ExperimentKind {
  kDmSweep,
  kNoiseSweep,
  kSubsetSweep,
  kIfcaCompare,
  kIfcaMisspecified,
  kOracleCompare,
  kOnline,
  kTreeAgnostic,
};

inline const std::vector<std::pair<ExperimentKind, std::string>>& experiment_kinds() {
  static const std::vector<std::pair<ExperimentKind, std::string>> kinds{
      {ExperimentKind::kDmSweep, "dm_sweep"},
      {ExperimentKind::kNoiseSweep, "noise_sweep"},
      {ExperimentKind::kSubsetSweep, "subset_sweep"},
      {ExperimentKind::kIfcaCompare, "ifca_compare"},
      {ExperimentKind::kIfcaMisspecified, "ifca_misspecified"},
      {ExperimentKind::kOracleCompare, "oracle_compare"},
      {ExperimentKind::kOnline, "online"},
      {ExperimentKind::kTreeAgnostic, "tree_agnostic"},
  };
  return kinds;
}

inline std::string valid_kind_list() {
  std::string s;
  for (const auto& [k, name] : experiment_kinds()) s += (s.empty() ? "" : ", ") + name;
  return s;
}

inline std::string kind_name(ExperimentKind kind) {
  for (const auto& [k, name] : experiment_kinds()) {
    if (k == kind) return name;
  }
  return "unknown";
}

inline ExperimentKind parse_kind(const std::string& name) {
  for (const auto& [k, n] : experiment_kinds()) {
    if (n == name) return k;
  }
  throw ConfigError("unknown experiment kind '" + name + "'; valid kinds: " + valid_kind_list());
}

// Every field is optional in the config file; unset fields take the
// kind-specific defaults applied by resolve().
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kDmSweep;
  std::uint64_t seed = 1;
  std::size_t n_seeds = 5;
  std::size_t rounds = 500;
  std::size_t threads = 1;  // 0: one per hardware thread
  std::string output;

  // data
  std::size_t n_devices = 100;
  std::size_t samples_per_device = 10;
  std::optional<double> noise_std;
  std::optional<std::vector<std::size_t>> cluster_sizes;
  std::pair<double, double> param_range{-5.0, 5.0};
  std::optional<double> dim_ratio;

  // algorithm
  std::optional<double> eta;
  std::size_t candidate_count = 20;
  std::size_t target_device = 0;
  InitKind init = InitKind::kZero;
  std::size_t batch_size = 10;
  std::string model = "tree";
  std::size_t max_depth = 3;
  std::size_t min_leaf = 1;
  std::size_t test_size = 100;
  std::size_t validation_size = 100;

  // ifca
  std::size_t ifca_k = 2;
  double ifca_eta = 0.05;
  double ifca_init_scale = 1.0;

  std::optional<std::vector<double>> sweep;

  // Filled by resolve(): true when noise_std came from the default.
  bool noise_defaulted = false;
};

inline std::string sweep_parameter(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kNoiseSweep: return "noise_std";
    case ExperimentKind::kSubsetSweep: return "candidate_count";
    default: return "dim_ratio";
  }
}

inline std::vector<std::string> methods_of(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kIfcaCompare:
    case ExperimentKind::kIfcaMisspecified: return {"alg1", "ifca"};
    case ExperimentKind::kOracleCompare: return {"alg1", "oracle"};
    case ExperimentKind::kTreeAgnostic: return {"alg2", "local"};
    default: return {"alg1"};
  }
}

// Fill kind-specific defaults so the manifest lists every value in effect.
inline ExperimentConfig resolve(ExperimentConfig cfg) {
  using K = ExperimentKind;
  const K k = cfg.kind;
  if (!cfg.sweep) {
    switch (k) {
      case K::kNoiseSweep: cfg.sweep = {0.05, 0.1, 0.2, 0.5, 1.0}; break;
      case K::kSubsetSweep: cfg.sweep = {5, 10, 15, 20, 30}; break;
      case K::kIfcaCompare:
      case K::kIfcaMisspecified: cfg.sweep = {0.2, 2, 5}; break;
      case K::kOracleCompare: cfg.sweep = {2}; break;
      default: cfg.sweep = {0.2, 1, 2, 5, 10}; break;
    }
  }
  if (!cfg.cluster_sizes) {
    if (k == K::kIfcaMisspecified) {
      cfg.cluster_sizes = std::vector<std::size_t>(5, cfg.n_devices / 5);
    } else {
      cfg.cluster_sizes = {cfg.n_devices / 2, cfg.n_devices - cfg.n_devices / 2};
    }
  }
  if (!cfg.noise_std) {
    cfg.noise_std = 0.0;
    cfg.noise_defaulted = k != K::kNoiseSweep;
  }
  if (!cfg.dim_ratio) cfg.dim_ratio = 2.0;
  if (!cfg.eta) cfg.eta = k == K::kTreeAgnostic ? 1.0 : 0.05;

  if (cfg.sweep->empty()) throw ConfigError("sweep values must be nonempty");
  if (cfg.n_seeds == 0) throw ConfigError("n_seeds must be positive");
  if (cfg.samples_per_device == 0) throw ConfigError("samples_per_device must be positive");
  for (double v : *cfg.sweep) {
    if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
    const std::string p = sweep_parameter(k);
    if (p == "dim_ratio" && !(v > 0.0)) throw ConfigError("dim_ratio sweep values must be positive");
    if (p == "noise_std" && !(v >= 0.0)) throw ConfigError("noise_std sweep values must be nonnegative");
    if (p == "candidate_count" && (v < 1 || v != std::floor(v))) {
      throw ConfigError("candidate_count sweep values must be positive integers");
    }
  }
  if (cfg.model != "tree" && cfg.model != "linear") {
    throw ConfigError("model must be 'tree' or 'linear'");
  }
  return cfg;
}

inline std::size_t dim_for_ratio(double ratio, std::size_t m) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(m))));
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string sweep_label(ExperimentKind kind, double v) {
  const std::string p = sweep_parameter(kind);
  if (p == "noise_std") return "sigma=" + format_number(v);
  if (p == "candidate_count") return "S=" + format_number(v);
  return "d/m=" + format_number(v);
}

// ---------------------------------------------------------------------------
// Config file parsing

namespace detail {

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed,
                           const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError("unknown key '" + key + "' in " + where + " (allowed: " + list + ")");
    }
  }
}

template <typename T>
void read_into(const Json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
void read_into(const Json& obj, const char* key, std::optional<T>& out) {
  if (!obj.contains(key)) return;
  T v{};
  read_into(obj, key, v);
  out = std::move(v);
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const Json& j) {
  detail::reject_unknown(j, {"kind", "seed", "n_seeds", "rounds", "threads", "output", "data",
                             "algorithm", "ifca", "sweep"},
                         "experiment config");
  ExperimentConfig cfg;
  if (!j.contains("kind")) throw ConfigError("experiment config needs a 'kind'");
  cfg.kind = parse_kind(j.at("kind").get<std::string>());
  detail::read_into(j, "seed", cfg.seed);
  detail::read_into(j, "n_seeds", cfg.n_seeds);
  detail::read_into(j, "rounds", cfg.rounds);
  detail::read_into(j, "threads", cfg.threads);
  detail::read_into(j, "output", cfg.output);
  detail::read_into(j, "sweep", cfg.sweep);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::reject_unknown(d, {"n_devices", "samples_per_device", "noise_std", "cluster_sizes",
                               "param_range", "dim_ratio"},
                           "data");
    detail::read_into(d, "n_devices", cfg.n_devices);
    detail::read_into(d, "samples_per_device", cfg.samples_per_device);
    detail::read_into(d, "noise_std", cfg.noise_std);
    detail::read_into(d, "cluster_sizes", cfg.cluster_sizes);
    detail::read_into(d, "dim_ratio", cfg.dim_ratio);
    if (d.contains("param_range")) {
      std::vector<double> r;
      detail::read_into(d, "param_range", r);
      if (r.size() != 2) throw ConfigError("param_range must have two entries");
      cfg.param_range = {r[0], r[1]};
    }
  }
  if (j.contains("algorithm")) {
    const auto& a = j.at("algorithm");
    detail::reject_unknown(a, {"eta", "candidate_count", "target_device", "init", "batch_size",
                               "model", "max_depth", "min_leaf", "test_size", "validation_size"},
                           "algorithm");
    detail::read_into(a, "eta", cfg.eta);
    detail::read_into(a, "candidate_count", cfg.candidate_count);
    detail::read_into(a, "target_device", cfg.target_device);
    detail::read_into(a, "batch_size", cfg.batch_size);
    detail::read_into(a, "model", cfg.model);
    detail::read_into(a, "max_depth", cfg.max_depth);
    detail::read_into(a, "min_leaf", cfg.min_leaf);
    detail::read_into(a, "test_size", cfg.test_size);
    detail::read_into(a, "validation_size", cfg.validation_size);
    if (a.contains("init")) {
      const auto s = a.at("init").get<std::string>();
      if (s == "zero") cfg.init = InitKind::kZero;
      else if (s == "local_pretrain") cfg.init = InitKind::kLocalPretrain;
      else throw ConfigError("init must be 'zero' or 'local_pretrain'");
    }
  }
  if (j.contains("ifca")) {
    const auto& f = j.at("ifca");
    detail::reject_unknown(f, {"k_assumed", "eta", "init_scale"}, "ifca");
    detail::read_into(f, "k_assumed", cfg.ifca_k);
    detail::read_into(f, "eta", cfg.ifca_eta);
    detail::read_into(f, "init_scale", cfg.ifca_init_scale);
  }
  return cfg;
}

inline Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

// A sweep file is either one experiment config or {"experiments": [...]}.
inline std::vector<ExperimentConfig> parse_sweep_file(const Json& j) {
  std::vector<ExperimentConfig> out;
  if (j.is_object() && j.contains("experiments")) {
    detail::reject_unknown(j, {"experiments"}, "sweep file");
    const auto& list = j.at("experiments");
    if (!list.is_array() || list.empty()) throw ConfigError("'experiments' must be a nonempty array");
    for (const auto& e : list) out.push_back(parse_experiment_config(e));
  } else {
    out.push_back(parse_experiment_config(j));
  }
  return out;
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["kind"] = kind_name(c.kind);
  j["seed"] = c.seed;
  j["n_seeds"] = c.n_seeds;
  j["rounds"] = c.rounds;
  j["data"] = {
      {"n_devices", c.n_devices},
      {"samples_per_device", c.samples_per_device},
      {"noise_std", c.noise_std.value_or(0.0)},
      {"noise_std_defaulted", c.noise_defaulted},
      {"cluster_sizes", c.cluster_sizes.value_or(std::vector<std::size_t>{})},
      {"param_range", {c.param_range.first, c.param_range.second}},
      {"dim_ratio", c.dim_ratio.value_or(0.0)},
  };
  j["algorithm"] = {
      {"eta", c.eta.value_or(0.0)},
      {"candidate_count", c.candidate_count},
      {"target_device", c.target_device},
      {"init", c.init == InitKind::kZero ? "zero" : "local_pretrain"},
      {"pretrain_penalty", Alg1Config{}.pretrain_penalty},
      {"batch_size", c.batch_size},
      {"model", c.model},
      {"max_depth", c.max_depth},
      {"min_leaf", c.min_leaf},
      {"test_size", c.test_size},
      {"validation_size", c.validation_size},
  };
  j["ifca"] = {{"k_assumed", c.ifca_k}, {"eta", c.ifca_eta}, {"init_scale", c.ifca_init_scale}};
  j["sweep"] = {{"parameter", sweep_parameter(c.kind)},
                {"values", c.sweep.value_or(std::vector<double>{})}};
  return j;
}

// ---------------------------------------------------------------------------
// Execution

struct MethodTable {
  std::string method;
  std::vector<MetricTrace> averaged;               // one per sweep value
  std::vector<std::vector<MetricTrace>> per_seed;  // [sweep value][repetition]
};

struct ExperimentResult {
  ExperimentConfig config;  // resolved
  std::vector<std::uint64_t> run_seeds;
  std::vector<std::size_t> dims;  // per sweep value
  std::vector<MethodTable> tables;

  const MethodTable& table(const std::string& method) const {
    for (const auto& t : tables) {
      if (t.method == method) return t;
    }
    throw std::out_of_range("no method '" + method + "' in experiment result");
  }
};

inline std::uint64_t repetition_seed(std::uint64_t master, std::size_t repetition) {
  return derive_seed(master, Stream::kRepetition, repetition);
}

namespace detail {

struct JobSetting {
  SyntheticSpec spec;
  std::size_t candidate_count = 0;
};

inline JobSetting job_setting(const ExperimentConfig& c, double sweep_value, std::uint64_t run_seed) {
  JobSetting s;
  s.spec.n_devices = c.n_devices;
  s.spec.samples_per_device = c.samples_per_device;
  s.spec.noise_std = *c.noise_std;
  s.spec.cluster_sizes = *c.cluster_sizes;
  s.spec.param_range = c.param_range;
  s.spec.seed = run_seed;
  s.candidate_count = c.candidate_count;
  double ratio = *c.dim_ratio;
  const std::string p = sweep_parameter(c.kind);
  if (p == "dim_ratio") ratio = sweep_value;
  if (p == "noise_std") s.spec.noise_std = sweep_value;
  if (p == "candidate_count") s.candidate_count = static_cast<std::size_t>(sweep_value);
  s.spec.dim = dim_for_ratio(ratio, c.samples_per_device);
  return s;
}

// One repetition of one sweep value; returns a trace per method.
inline std::vector<std::vector<double>> run_job(const ExperimentConfig& c, double sweep_value,
                                                std::uint64_t run_seed) {
  using K = ExperimentKind;
  const JobSetting s = job_setting(c, sweep_value, run_seed);
  const Federation fed = generate_federation(s.spec);

  Alg1Config a1;
  a1.eta = *c.eta;
  a1.rounds = c.rounds;
  a1.candidate_count = s.candidate_count;
  a1.target_device = c.target_device;
  a1.init = c.init;
  a1.seed = run_seed;

  IfcaConfig ic;
  ic.k_assumed = c.ifca_k;
  ic.eta = c.ifca_eta;
  ic.rounds = c.rounds;
  ic.init_scale = c.ifca_init_scale;
  ic.target_device = c.target_device;
  ic.seed = run_seed;

  switch (c.kind) {
    case K::kDmSweep:
    case K::kNoiseSweep:
    case K::kSubsetSweep: return {run_algorithm1(fed, a1).mse};
    case K::kOnline: return {run_algorithm1_online(fed, a1, c.batch_size).mse};
    case K::kIfcaCompare:
    case K::kIfcaMisspecified: return {run_algorithm1(fed, a1).mse, run_ifca(fed, ic).mse};
    case K::kOracleCompare: return {run_algorithm1(fed, a1).mse, run_oracle_sampler(fed, a1).mse};
    case K::kTreeAgnostic: {
      const ModelSpec model = c.model == "linear" ? ModelSpec::linear()
                                                  : ModelSpec::tree_of_depth(c.max_depth, c.min_leaf);
      Alg2Config a2;
      a2.eta = *c.eta;
      a2.rounds = c.rounds;
      a2.candidate_count = s.candidate_count;
      a2.target_device = c.target_device;
      a2.model = model;
      a2.seed = run_seed;
      a2.test_set = generate_unlabeled_test_set(c.test_size, fed.dim(), run_seed);
      const LocalDataset val = generate_validation_set(c.target_device, fed, c.validation_size, run_seed);
      const double oracle_mse = validation_mse(train_cluster_oracle_model(fed, c.target_device, model), val);
      const double local_norm =
          normalized_mse(validation_mse(train_local_only(fed.at(c.target_device), model), val), oracle_mse);
      auto alg2 = run_algorithm2(fed, a2, val).validation_mse;
      for (auto& v : alg2) v = normalized_mse(v, oracle_mse);
      return {std::move(alg2), std::vector<double>(c.rounds + 1, local_norm)};
    }
  }
  throw ConfigError("unhandled experiment kind");
}

// Runs fn(i) for i in [0, count) on up to `threads` workers. Exceptions are
// rethrown in index order after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  std::vector<std::exception_ptr> errors(count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& raw) {
  ExperimentResult r;
  r.config = resolve(raw);
  const auto& c = r.config;
  const auto& values = *c.sweep;
  const auto methods = methods_of(c.kind);

  for (std::size_t s = 0; s < c.n_seeds; ++s) r.run_seeds.push_back(repetition_seed(c.seed, s));
  for (double v : values) r.dims.push_back(detail::job_setting(c, v, 0).spec.dim);

  // Validate the resolved settings up front so errors name the config.
  {
    const auto probe = detail::job_setting(c, values.front(), 0);
    probe.spec.validate();
    Alg1Config a1;
    a1.eta = *c.eta;
    a1.candidate_count = probe.candidate_count;
    a1.target_device = c.target_device;
    for (double v : values) {
      a1.candidate_count = detail::job_setting(c, v, 0).candidate_count;
      a1.validate(c.n_devices);
    }
  }

  const std::size_t jobs = values.size() * c.n_seeds;
  std::vector<std::vector<std::vector<double>>> slots(jobs);
  detail::parallel_for(jobs, c.threads, [&](std::size_t j) {
    const std::size_t v = j / c.n_seeds, s = j % c.n_seeds;
    slots[j] = detail::run_job(c, values[v], r.run_seeds[s]);
  });

  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodTable t;
    t.method = methods[m];
    for (std::size_t v = 0; v < values.size(); ++v) {
      const std::string label = sweep_label(c.kind, values[v]);
      std::vector<MetricTrace> seeds;
      for (std::size_t s = 0; s < c.n_seeds; ++s) {
        seeds.push_back(make_trace(label + " seed=" + std::to_string(s), slots[v * c.n_seeds + s][m]));
      }
      t.averaged.push_back(average_traces(seeds, label));
      t.averaged.back().validate();
      t.per_seed.push_back(std::move(seeds));
    }
    r.tables.push_back(std::move(t));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Output

inline std::string traces_to_csv(const std::vector<MetricTrace>& cols) {
  std::string out = "k";
  for (const auto& t : cols) out += "," + t.label;
  out += "\n";
  const std::size_t rows = cols.empty() ? 0 : cols.front().size();
  for (std::size_t i = 0; i < rows; ++i) {
    out += std::to_string(cols.front().values[i].first);
    for (const auto& t : cols) out += "," + format_number(t.values[i].second);
    out += "\n";
  }
  return out;
}

inline std::string table_stem(const ExperimentResult& r, const std::string& method) {
  const std::string kind = kind_name(r.config.kind);
  return r.tables.size() == 1 ? kind : kind + "_" + method;
}

inline Json manifest_of(const ExperimentResult& r, const std::vector<std::string>& files) {
  Json m;
  m["format"] = "persfl-experiment-1";
  m["config"] = to_json(r.config);
  m["threads"] = r.config.threads;
  m["run_seeds"] = r.run_seeds;
  m["dims"] = r.dims;
  m["csv_columns"] = "column 0 is round k (0 = initial model); column v is the seed-averaged metric for sweep value v";
  m["metric"] = r.config.kind == ExperimentKind::kTreeAgnostic
                    ? "normalized validation MSE (summed squared error / oracle model's)"
                    : "squared parameter error ||w - wbar_target||^2";
  Json summary;
  for (const auto& t : r.tables) {
    Json s;
    for (const auto& tr : t.averaged) s[tr.label] = tr.back();
    summary[t.method] = s;
  }
  m["final_values"] = summary;
  m["files"] = files;
  return m;
}

inline std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("PERSFL_OUT_DIR"); env && *env) return env;
  return "results";
}

// Writes <stem>.csv, <stem>_per_seed.csv per method and <kind>_manifest.json.
inline std::vector<std::filesystem::path> write_experiment(const ExperimentResult& r,
                                                           const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<fs::path> written;
  std::vector<std::string> names;
  auto write = [&](const std::string& name, const std::string& body) {
    const fs::path p = dir / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << body;
    written.push_back(p);
    names.push_back(name);
  };
  for (const auto& t : r.tables) {
    const std::string stem = table_stem(r, t.method);
    write(stem + ".csv", traces_to_csv(t.averaged));
    std::vector<MetricTrace> flat;
    for (const auto& seeds : t.per_seed) flat.insert(flat.end(), seeds.begin(), seeds.end());
    write(stem + "_per_seed.csv", traces_to_csv(flat));
  }
  const std::string manifest_name = kind_name(r.config.kind) + "_manifest.json";
  std::vector<std::string> listed = names;
  listed.push_back(manifest_name);
  write(manifest_name, manifest_of(r, listed).dump(2) + "\n");
  return written;
}

}  // namespace persfl
