#pragma once

// End-to-end acceptance checks. Each check runs at fixed seeds and fixed
// thresholds and reports one line.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "persfl/persfl.hpp"
#include "persfl/verify/oracles.hpp"

namespace persfl::verify {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Random dataset with d features, m rows and labels from a random w plus noise.
inline LocalDataset random_dataset(std::size_t m, std::size_t d, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  Vector y(static_cast<Eigen::Index>(m));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = normal(rng);
    y(r) = 3.0 * normal(rng);
  }
  return LocalDataset(std::move(x), std::move(y));
}

inline Vector random_vector(std::size_t d, Engine& rng, double scale = 2.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = normal(rng);
  return v;
}

inline std::size_t count_if_seeds(const std::vector<MetricTrace>& seeds,
                                  const std::function<bool(const MetricTrace&)>& pred) {
  std::size_t n = 0;
  for (const auto& t : seeds) n += pred(t) ? 1 : 0;
  return n;
}

// Smallest k <= last_round with value <= threshold; last_round + 1 if never.
inline std::size_t rounds_to_reach(const MetricTrace& t, double threshold, std::size_t last_round) {
  for (const auto& [k, v] : t.values) {
    if (k > last_round) break;
    if (v <= threshold) return k;
  }
  return last_round + 1;
}

inline bool reached_within(const MetricTrace& t, double threshold, std::size_t rounds) {
  return rounds_to_reach(t, threshold, rounds) <= rounds;
}

inline ExperimentConfig base_config(ExperimentKind kind, std::vector<double> sweep) {
  ExperimentConfig c;
  c.kind = kind;
  c.seed = 1;
  c.n_seeds = 5;
  c.rounds = 500;
  c.threads = 0;
  c.sweep = std::move(sweep);
  return c;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace detail

inline CriterionResult check_gradient_oracle() {
  CriterionResult r{1, "gradient matches central finite differences (100 instances, rel err <= 1e-6)"};
  Engine rng = make_engine(101, Stream::kRepetition);
  std::uniform_int_distribution<std::size_t> dim(1, 8), rows(1, 12);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto data = detail::random_dataset(rows(rng), dim(rng), rng);
    const LinearParams w(detail::random_vector(data.dim(), rng));
    const Vector analytic = loss_gradient(w, data);
    const Vector fd = central_difference_gradient(
        [&](const Vector& v) { return loop_squared_loss(v, data); }, w.weights, 1e-5);
    const double rel = (analytic - fd).norm() / std::max(fd.norm(), 1e-12);
    worst = std::max(worst, rel);
  }
  r.passed = worst <= 1e-6;
  r.detail = detail::fmt("max relative error %.3e", worst);
  return r;
}

inline CriterionResult check_proximal_oracle() {
  CriterionResult r{2, "proximal closed form matches numeric minimizer (20 instances, 1e-6)"};
  Engine rng = make_engine(202, Stream::kRepetition);
  std::uniform_int_distribution<std::size_t> dim(1, 5), rows(1, 10);
  std::uniform_real_distribution<double> eta(0.05, 5.0);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto data = detail::random_dataset(rows(rng), dim(rng), rng);
    const LinearParams anchor(detail::random_vector(data.dim(), rng));
    const double e = eta(rng);
    const Vector closed = proximal_least_squares(anchor, data, e).weights;
    const Vector numeric = gradient_descent_proximal(anchor.weights, data, e);
    worst = std::max(worst, (closed - numeric).lpNorm<Eigen::Infinity>());
  }
  r.passed = worst <= 1e-6;
  r.detail = detail::fmt("max parameter deviation %.3e", worst);
  return r;
}

inline CriterionResult check_tree_oracle() {
  CriterionResult r{3, "greedy tree splits equal exhaustive enumeration (50 micro-datasets)"};
  Engine rng = make_engine(303, Stream::kRepetition);
  std::uniform_int_distribution<std::size_t> rows(2, 12), feats(1, 2), depth(1, 2);
  std::uniform_real_distribution<double> weight(0.1, 2.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coarse(0.5);
  std::size_t nodes = 0, bad = 0;
  std::string first;
  for (int t = 0; t < 50; ++t) {
    const auto n = rows(rng), d = feats(rng);
    const bool round_features = coarse(rng);  // duplicates exercise tied values
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    Vector y(x.rows()), w(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        x(i, j) = round_features ? std::round(2.0 * normal(rng)) / 2.0 : normal(rng);
      }
      y(i) = normal(rng);
      w(i) = weight(rng);
    }
    const TreeOptions opt{depth(rng), 1};
    const auto tree = fit_tree(x, y, w, opt);
    const auto check = check_tree_by_enumeration(tree, x, y, w, opt);
    nodes += check.nodes_checked;
    bad += check.mismatches;
    if (first.empty() && !check.first_problem.empty()) first = check.first_problem;
  }
  r.passed = bad == 0;
  r.detail = detail::fmt("%zu nodes checked, %zu mismatches", nodes, bad) +
             (first.empty() ? "" : " (" + first + ")");
  return r;
}

inline CriterionResult check_alg1_convergence() {
  CriterionResult r{4, "gradient-probing d/m=0.2 reaches MSE<=1e-3 by round 300 in >=4/5 seeds; d/m=10 slower to 1e-1"};
  const auto res = run_experiment(detail::base_config(ExperimentKind::kDmSweep, {0.2, 10}));
  const auto& t = res.table("alg1");
  const auto ok = detail::count_if_seeds(
      t.per_seed[0], [](const MetricTrace& s) { return detail::reached_within(s, 1e-3, 300); });
  const auto fast = detail::rounds_to_reach(t.averaged[0], 1e-1, 500);
  const auto slow = detail::rounds_to_reach(t.averaged[1], 1e-1, 500);
  r.passed = ok >= 4 && slow > fast;
  r.detail = detail::fmt("%zu/5 seeds converged; rounds to 1e-1: d/m=0.2 -> %zu, d/m=10 -> %zu%s", ok,
                         fast, slow, slow > 500 ? " (not reached)" : "");
  return r;
}

inline CriterionResult check_noise_monotonicity() {
  CriterionResult r{5, "final MSE nondecreasing in sigma (d/m=2, S=20, matched seeds)"};
  const auto res = run_experiment(
      detail::base_config(ExperimentKind::kNoiseSweep, {0.05, 0.1, 0.2, 0.5, 1.0}));
  const auto& t = res.table("alg1");
  bool mono = true;
  std::string vals;
  for (std::size_t i = 0; i < t.averaged.size(); ++i) {
    vals += detail::fmt("%s%.3e", i ? " " : "", t.averaged[i].back());
    if (i > 0 && t.averaged[i].back() < t.averaged[i - 1].back()) mono = false;
  }
  r.passed = mono;
  r.detail = "final MSE by sigma: " + vals;
  return r;
}

inline CriterionResult check_subset_size_effect() {
  CriterionResult r{6, "final MSE at S=5 >= 10x that at S=20 (d/m=2, sigma=0)"};
  const auto res = run_experiment(detail::base_config(ExperimentKind::kSubsetSweep, {5, 20}));
  const auto& t = res.table("alg1");
  const double s5 = t.averaged[0].back(), s20 = t.averaged[1].back();
  r.passed = s5 >= 10.0 * s20;
  r.detail = detail::fmt("S=5: %.3e, S=20: %.3e, ratio %.3e", s5, s20, s5 / s20);
  return r;
}

inline CriterionResult check_oracle_comparability() {
  CriterionResult r{7, "gradient-probing final MSE <= 2x oracle sampler final MSE (d=2m, S=20, K=2)"};
  const auto res = run_experiment(detail::base_config(ExperimentKind::kOracleCompare, {2}));
  const double a = res.table("alg1").averaged[0].back();
  const double o = res.table("oracle").averaged[0].back();
  r.passed = a <= 2.0 * o;
  r.detail = detail::fmt("alg1 %.3e, oracle %.3e, ratio %.3e (sigma=%g)", a, o, a / o,
                         *res.config.noise_std);
  return r;
}

inline CriterionResult check_ifca_well_specified() {
  CriterionResult r{8, "gradient-probing and IFCA(k=2) reach MSE<=1e-2 within 500 rounds at d/m=0.2 (>=4/5 seeds each)"};
  const auto res = run_experiment(detail::base_config(ExperimentKind::kIfcaCompare, {0.2}));
  auto within = [](const MetricTrace& s) { return detail::reached_within(s, 1e-2, 500); };
  const auto a = detail::count_if_seeds(res.table("alg1").per_seed[0], within);
  const auto f = detail::count_if_seeds(res.table("ifca").per_seed[0], within);
  r.passed = a >= 4 && f >= 4;
  r.detail = detail::fmt("alg1 %zu/5 seeds, ifca %zu/5 seeds", a, f);
  return r;
}

inline CriterionResult check_ifca_misspecified() {
  CriterionResult r{9, "K_true=5, IFCA k=2: gradient-probing final MSE < IFCA final MSE for d/m in {0.2,2,5}"};
  const auto res = run_experiment(detail::base_config(ExperimentKind::kIfcaMisspecified, {0.2, 2, 5}));
  const auto& a = res.table("alg1").averaged;
  const auto& f = res.table("ifca").averaged;
  bool ok = true;
  std::string vals;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ok = ok && a[i].back() < f[i].back();
    vals += detail::fmt("%s%s alg1 %.3e vs ifca %.3e", i ? "; " : "", a[i].label.c_str(), a[i].back(),
                        f[i].back());
  }
  r.passed = ok;
  r.detail = vals;
  return r;
}

inline CriterionResult check_online_variant() {
  CriterionResult r{10, "online gradient-probing (|B|=10) MSE < 1e-1 within 500 rounds for d/m <= 2"};
  auto cfg = detail::base_config(ExperimentKind::kOnline, {0.2, 1, 2});
  cfg.batch_size = 10;
  const auto res = run_experiment(cfg);
  bool ok = true;
  std::string vals;
  for (const auto& t : res.table("alg1").averaged) {
    const auto k = detail::rounds_to_reach(t, std::nextafter(1e-1, 0.0), 500);
    ok = ok && k <= 500;
    vals += detail::fmt("%s%s -> %s", vals.empty() ? "" : "; ", t.label.c_str(),
                        k <= 500 ? std::to_string(k).c_str() : "not reached");
  }
  r.passed = ok;
  r.detail = "first round below 1e-1: " + vals;
  return r;
}

inline CriterionResult check_tree_experiment() {
  CriterionResult r{11, "model-agnostic trees: MSE_norm <= local-only for d/m>=1 and >= 0.8 for all d/m (5 seeds)"};
  const auto res = run_experiment(
      detail::base_config(ExperimentKind::kTreeAgnostic, {0.2, 1, 2, 5, 10}));
  const auto& a = res.table("alg2").averaged;
  const auto& l = res.table("local").averaged;
  const auto& values = *res.config.sweep;
  bool ok = true;
  std::string vals;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double alg = a[i].back(), loc = l[i].back();
    if (values[i] >= 1.0 && !(alg <= loc)) ok = false;
    if (!(alg >= 0.8)) ok = false;
    vals += detail::fmt("%s%s alg2 %.3f local %.3f", i ? "; " : "", a[i].label.c_str(), alg, loc);
  }
  r.passed = ok;
  r.detail = vals;
  return r;
}

inline CriterionResult check_selection_accuracy() {
  CriterionResult r{12, "noiseless S=20: >= 90% of selections after round 20 in the true cluster"};
  double worst = 1.0;
  std::string vals;
  for (double ratio : {0.2, 1.0, 2.0, 5.0, 10.0}) {
    std::size_t hits = 0, total = 0;
    for (std::size_t s = 0; s < 5; ++s) {
      SyntheticSpec spec;
      spec.dim = dim_for_ratio(ratio, spec.samples_per_device);
      spec.seed = repetition_seed(1, s);
      const auto fed = generate_federation(spec);
      Alg1Config cfg;
      cfg.rounds = 500;
      cfg.seed = spec.seed;
      const auto run = run_algorithm1(fed, cfg);
      for (const auto& rec : run.records) {
        if (rec.round <= 20) continue;
        ++total;
        hits += fed.truth.device_to_cluster[rec.chosen] == fed.truth.device_to_cluster[0] ? 1 : 0;
      }
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(total);
    worst = std::min(worst, acc);
    vals += detail::fmt("%sd/m=%g %.4f", vals.empty() ? "" : ", ", ratio, acc);
  }
  r.passed = worst >= 0.9;
  r.detail = vals;
  return r;
}

inline CriterionResult check_determinism() {
  CriterionResult r{13, "run dm_sweep --seed 1 twice gives byte-identical CSVs, serial and parallel"};
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() /
                        ("persfl_determinism_" + std::to_string(std::random_device{}()));
  auto cfg = detail::base_config(ExperimentKind::kDmSweep, {0.2, 1, 2, 5, 10});
  const std::size_t wide = std::max<std::size_t>(8, std::thread::hardware_concurrency());
  std::vector<std::vector<fs::path>> runs;
  for (std::size_t threads : {std::size_t{1}, std::size_t{1}, wide}) {
    cfg.threads = threads;
    runs.push_back(write_experiment(run_experiment(cfg), base / ("run" + std::to_string(runs.size()))));
  }
  bool same = true;
  std::size_t compared = 0;
  for (std::size_t i = 0; i < runs[0].size(); ++i) {
    if (runs[0][i].extension() != ".csv") continue;
    const auto ref = detail::read_file(runs[0][i]);
    for (std::size_t k = 1; k < runs.size(); ++k) {
      same = same && ref == detail::read_file(runs[k][i]);
      ++compared;
    }
  }
  fs::remove_all(base);
  r.passed = same && compared > 0;
  r.detail = detail::fmt("%zu CSV comparisons across threads={1,1,%zu}: %s", compared, wide,
                         same ? "identical" : "DIFFER");
  return r;
}

inline std::vector<std::pair<int, std::function<CriterionResult()>>> all_criteria() {
  return {{1, check_gradient_oracle},       {2, check_proximal_oracle},
          {3, check_tree_oracle},           {4, check_alg1_convergence},
          {5, check_noise_monotonicity},    {6, check_subset_size_effect},
          {7, check_oracle_comparability},  {8, check_ifca_well_specified},
          {9, check_ifca_misspecified},     {10, check_online_variant},
          {11, check_tree_experiment},      {12, check_selection_accuracy},
          {13, check_determinism}};
}

// Runs the selected criteria (all when `only` is empty), printing one line
// each; returns the number failed.
inline int run_acceptance(std::FILE* out, const std::vector<int>& only = {}) {
  int failed = 0;
  for (const auto& [id, check] : all_criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    CriterionResult res;
    try {
      res = check();
    } catch (const std::exception& e) {
      res = CriterionResult{id, "criterion raised an exception", false, e.what()};
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += res.passed ? 0 : 1;
    std::fprintf(out, "[%s] C%02d %s | %s (%.1fs)\n", res.passed ? "PASS" : "FAIL", res.id,
                 res.name.c_str(), res.detail.c_str(), res.seconds);
    std::fflush(out);
  }
  return failed;
}

}  // namespace persfl::verify
