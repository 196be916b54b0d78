// Command-line front end:
//   persfl generate  [--seed S] [--out DIR] [data options]
//   persfl run KIND  [--seed S] [--out DIR] [--config FILE] [--seeds N] [--rounds R] [--threads T]
//   persfl sweep     --config FILE [--out DIR]
//   persfl verify    [--only ID ...]

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "persfl/persfl.hpp"
#include "persfl/verify/acceptance.hpp"

namespace {

namespace fs = std::filesystem;
using namespace persfl;

struct Common {
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string out;
  std::string config;
  bool quiet = false;
};

void report(const ExperimentResult& r, const std::vector<fs::path>& files, bool quiet) {
  if (quiet) return;
  std::printf("%s: %zu sweep values x %zu seeds, %zu rounds\n", kind_name(r.config.kind).c_str(),
              r.config.sweep->size(), r.config.n_seeds, r.config.rounds);
  for (const auto& t : r.tables) {
    for (const auto& tr : t.averaged) {
      std::printf("  %-7s %-14s final %.6g\n", t.method.c_str(), tr.label.c_str(), tr.back());
    }
  }
  for (const auto& f : files) std::printf("  wrote %s\n", f.string().c_str());
}

fs::path output_dir(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.output.empty()) return cfg.output;
  return default_output_dir();
}

int run_one(ExperimentConfig cfg, const Common& common) {
  if (common.seed_set) cfg.seed = common.seed;
  const auto result = run_experiment(cfg);
  const auto files = write_experiment(result, output_dir(common.out, cfg));
  report(result, files, common.quiet);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic personalized federated learning experiments"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "master random seed (default 1)")->each([&](const std::string&) {
      common.seed_set = true;
    });
    sub->add_option("--out", common.out, "output directory (default $PERSFL_OUT_DIR or ./results)");
    sub->add_flag("--quiet", common.quiet, "suppress progress output");
  };

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic federation to disk");
  add_common(gen);
  SyntheticSpec spec;
  gen->add_option("--devices", spec.n_devices, "number of devices n")->capture_default_str();
  gen->add_option("--samples", spec.samples_per_device, "samples per device m")->capture_default_str();
  gen->add_option("--dim", spec.dim, "feature dimension d")->capture_default_str();
  gen->add_option("--sigma", spec.noise_std, "label noise standard deviation")->capture_default_str();
  gen->add_option("--clusters", spec.cluster_sizes, "cluster sizes summing to --devices (default: two halves)")
      ->delimiter(',');

  // run
  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run);
  std::string kind;
  std::size_t seeds = 0, rounds = 0, threads = 1;
  bool threads_set = false;
  run->add_option("kind", kind, "experiment kind: " + valid_kind_list())->required();
  run->add_option("--config", common.config, "JSON experiment config overriding defaults");
  run->add_option("--seeds", seeds, "number of repetitions");
  run->add_option("--rounds", rounds, "rounds per run");
  run->add_option("--threads", threads, "worker threads (0 = all cores)")->each([&](const std::string&) {
    threads_set = true;
  });

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run every experiment listed in a config file");
  add_common(sweep);
  sweep->add_option("--config", common.config, "JSON file: one config or {\"experiments\": [...]}")
      ->required();

  // verify
  auto* verify = app.add_subcommand("verify", "run the acceptance suite");
  std::vector<int> only;
  verify->add_option("--only", only, "criterion ids to run (default all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      spec.seed = common.seed;
      if (gen->count("--clusters") == 0) {
        spec.cluster_sizes = {spec.n_devices / 2, spec.n_devices - spec.n_devices / 2};
      }
      const auto fed = generate_federation(spec);
      const fs::path dir = common.out.empty() ? default_output_dir() / "federation" : fs::path(common.out);
      write_federation(fed, dir);
      if (!common.quiet) {
        std::printf("wrote %zu devices (d=%zu, m=%zu, %zu clusters) to %s\n", fed.size(), fed.dim(),
                    spec.samples_per_device, spec.n_clusters(), dir.string().c_str());
      }
      return 0;
    }
    if (*run) {
      ExperimentConfig cfg;
      if (!common.config.empty()) {
        Json j = load_json_file(common.config);
        if (!j.contains("kind")) j["kind"] = kind;
        cfg = parse_experiment_config(j);
        if (kind_name(cfg.kind) != kind) {
          throw ConfigError("config kind '" + kind_name(cfg.kind) + "' does not match '" + kind + "'");
        }
      } else {
        cfg.kind = parse_kind(kind);
      }
      if (seeds) cfg.n_seeds = seeds;
      if (rounds) cfg.rounds = rounds;
      if (threads_set) cfg.threads = threads;
      return run_one(cfg, common);
    }
    if (*sweep) {
      for (const auto& cfg : parse_sweep_file(load_json_file(common.config))) run_one(cfg, common);
      return 0;
    }
    if (*verify) {
      const int failed = persfl::verify::run_acceptance(stdout, only);
      std::printf("%s: %d criterion(s) failed\n", failed ? "FAILED" : "OK", failed);
      return failed ? 1 : 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "persfl: configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "persfl: error: %s\n", e.what());
    return 3;
  }
  return 0;
}
