#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "persfl/harness.hpp"

namespace {

using namespace persfl;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("persfl_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

ExperimentConfig quick(ExperimentKind kind, std::size_t rounds = 20, std::size_t seeds = 2) {
  ExperimentConfig c;
  c.kind = kind;
  c.rounds = rounds;
  c.n_seeds = seeds;
  return c;
}

TEST(Kinds, ParseAndName) {
  for (const auto& [kind, name] : experiment_kinds()) {
    EXPECT_EQ(parse_kind(name), kind);
    EXPECT_EQ(kind_name(kind), name);
  }
  try {
    parse_kind("bogus");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("dm_sweep"), std::string::npos);
    EXPECT_NE(msg.find("tree_agnostic"), std::string::npos);
  }
}

TEST(Resolve, DefaultsPerKind) {
  const auto dm = resolve(quick(ExperimentKind::kDmSweep));
  EXPECT_EQ(*dm.sweep, (std::vector<double>{0.2, 1, 2, 5, 10}));
  EXPECT_TRUE(dm.noise_defaulted);
  EXPECT_EQ(*dm.eta, 0.05);

  const auto noise = resolve(quick(ExperimentKind::kNoiseSweep));
  EXPECT_EQ(*noise.sweep, (std::vector<double>{0.05, 0.1, 0.2, 0.5, 1}));
  EXPECT_FALSE(noise.noise_defaulted);

  EXPECT_EQ(*resolve(quick(ExperimentKind::kSubsetSweep)).sweep, (std::vector<double>{5, 10, 15, 20, 30}));
  EXPECT_EQ(*resolve(quick(ExperimentKind::kIfcaMisspecified)).cluster_sizes,
            (std::vector<std::size_t>(5, 20)));
  EXPECT_EQ(*resolve(quick(ExperimentKind::kTreeAgnostic)).eta, 1.0);

  auto given = quick(ExperimentKind::kDmSweep);
  given.noise_std = 0.0;
  EXPECT_FALSE(resolve(given).noise_defaulted);
}

TEST(Resolve, RejectsBadValues) {
  auto c = quick(ExperimentKind::kSubsetSweep);
  c.sweep = std::vector<double>{2.5};
  EXPECT_THROW(resolve(c), ConfigError);
  c.sweep = std::vector<double>{};
  EXPECT_THROW(resolve(c), ConfigError);
  auto m = quick(ExperimentKind::kTreeAgnostic);
  m.model = "forest";
  EXPECT_THROW(resolve(m), ConfigError);
}

TEST(DimForRatio, RoundsAndClamps) {
  EXPECT_EQ(dim_for_ratio(0.2, 10), 2u);
  EXPECT_EQ(dim_for_ratio(10, 10), 100u);
  EXPECT_EQ(dim_for_ratio(0.01, 10), 1u);
}

TEST(ConfigParsing, ReadsNestedSections) {
  const auto j = Json::parse(R"({
    "kind": "noise_sweep", "seed": 9, "n_seeds": 3, "rounds": 50,
    "data": {"samples_per_device": 8, "dim_ratio": 1.5},
    "algorithm": {"eta": 0.01, "candidate_count": 7, "init": "local_pretrain"},
    "ifca": {"k_assumed": 3},
    "sweep": [0.1, 0.3]
  })");
  const auto c = parse_experiment_config(j);
  EXPECT_EQ(c.kind, ExperimentKind::kNoiseSweep);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.n_seeds, 3u);
  EXPECT_EQ(c.samples_per_device, 8u);
  EXPECT_EQ(*c.dim_ratio, 1.5);
  EXPECT_EQ(*c.eta, 0.01);
  EXPECT_EQ(c.candidate_count, 7u);
  EXPECT_EQ(c.init, InitKind::kLocalPretrain);
  EXPECT_EQ(c.ifca_k, 3u);
  EXPECT_EQ(*c.sweep, (std::vector<double>{0.1, 0.3}));
}

TEST(ConfigParsing, UnknownKeysAreErrors) {
  EXPECT_THROW(parse_experiment_config(Json::parse(R"({"kind":"dm_sweep","sedd":1})")), ConfigError);
  EXPECT_THROW(parse_experiment_config(Json::parse(R"({"kind":"dm_sweep","data":{"n":1}})")), ConfigError);
  EXPECT_THROW(parse_experiment_config(Json::parse(R"({"kind":"nope"})")), ConfigError);
  EXPECT_THROW(parse_experiment_config(Json::parse(R"({"seed":1})")), ConfigError);
  EXPECT_THROW(parse_experiment_config(Json::parse(R"({"kind":"dm_sweep","rounds":"many"})")),
               ConfigError);
}

TEST(ConfigParsing, SweepFileForms) {
  EXPECT_EQ(parse_sweep_file(Json::parse(R"({"kind":"online"})")).size(), 1u);
  const auto many = parse_sweep_file(
      Json::parse(R"({"experiments":[{"kind":"online"},{"kind":"dm_sweep","seed":4}]})"));
  ASSERT_EQ(many.size(), 2u);
  EXPECT_EQ(many[1].seed, 4u);
  EXPECT_THROW(parse_sweep_file(Json::parse(R"({"experiments":[]})")), ConfigError);
}

TEST(ConfigJson, ListsResolvedValues) {
  const auto j = to_json(resolve(quick(ExperimentKind::kIfcaCompare)));
  EXPECT_EQ(j["kind"], "ifca_compare");
  EXPECT_EQ(j["data"]["noise_std"], 0.0);
  EXPECT_EQ(j["data"]["noise_std_defaulted"], true);
  EXPECT_EQ(j["data"]["cluster_sizes"], Json::parse("[50,50]"));
  EXPECT_EQ(j["algorithm"]["eta"], 0.05);
  EXPECT_EQ(j["ifca"]["k_assumed"], 2);
  EXPECT_EQ(j["sweep"]["parameter"], "dim_ratio");
  EXPECT_EQ(j["sweep"]["values"], Json::parse("[0.2,2,5]"));
}

TEST(RunExperiment, SixColumnCsvPerSweepKind) {
  for (auto kind : {ExperimentKind::kDmSweep, ExperimentKind::kNoiseSweep, ExperimentKind::kSubsetSweep}) {
    const auto r = run_experiment(quick(kind, 10, 2));
    ASSERT_EQ(r.tables.size(), 1u);
    const auto rows = lines_of(traces_to_csv(r.tables[0].averaged));
    ASSERT_EQ(rows.size(), 12u);
    EXPECT_EQ(std::count(rows[0].begin(), rows[0].end(), ','), 5) << rows[0];
    EXPECT_EQ(rows[1].substr(0, 2), "0,");
    EXPECT_EQ(rows.back().substr(0, 3), "10,");
  }
  const auto head = lines_of(traces_to_csv(run_experiment(quick(ExperimentKind::kDmSweep, 1, 1)).tables[0].averaged))[0];
  EXPECT_EQ(head, "k,d/m=0.2,d/m=1,d/m=2,d/m=5,d/m=10");
}

TEST(RunExperiment, MethodsPerKind) {
  EXPECT_EQ(run_experiment(quick(ExperimentKind::kIfcaCompare, 5, 1)).tables.size(), 2u);
  const auto oracle = run_experiment(quick(ExperimentKind::kOracleCompare, 5, 1));
  EXPECT_NO_THROW(oracle.table("oracle"));
  EXPECT_THROW(oracle.table("ifca"), std::out_of_range);
  auto tree = quick(ExperimentKind::kTreeAgnostic, 3, 1);
  tree.sweep = std::vector<double>{1};
  const auto t = run_experiment(tree);
  const auto& local = t.table("local").averaged[0];
  EXPECT_EQ(local.values.front().second, local.back());
  EXPECT_GT(t.table("alg2").averaged[0].values.front().second, 0.0);
}

TEST(RunExperiment, AveragedTraceIsMeanOfSeeds) {
  const auto r = run_experiment(quick(ExperimentKind::kDmSweep, 5, 3));
  const auto& t = r.tables[0];
  for (std::size_t v = 0; v < t.averaged.size(); ++v) {
    ASSERT_EQ(t.per_seed[v].size(), 3u);
    EXPECT_EQ(average_traces(t.per_seed[v], "x").values, t.averaged[v].values);
  }
  EXPECT_EQ(r.run_seeds.size(), 3u);
  EXPECT_EQ(r.dims, (std::vector<std::size_t>{2, 10, 20, 50, 100}));
}

TEST(RunExperiment, InvalidSettingsFailUpFront) {
  auto c = quick(ExperimentKind::kSubsetSweep);
  c.sweep = std::vector<double>{200};
  EXPECT_THROW(run_experiment(c), ConfigError);
}

TEST(RunExperiment, ReproducibleAcrossThreadCounts) {
  auto c = quick(ExperimentKind::kIfcaCompare, 30, 3);
  c.threads = 1;
  const auto a = run_experiment(c);
  c.threads = 7;
  const auto b = run_experiment(c);
  for (std::size_t m = 0; m < a.tables.size(); ++m) {
    EXPECT_EQ(traces_to_csv(a.tables[m].averaged), traces_to_csv(b.tables[m].averaged));
  }
}

TEST(ParallelFor, RethrowsLowestIndexFailure) {
  std::vector<int> hit(50, 0);
  try {
    detail::parallel_for(50, 4, [&](std::size_t i) {
      hit[i] = 1;
      if (i == 13 || i == 40) throw std::runtime_error("job " + std::to_string(i));
    });
    FAIL() << "expected a rethrow";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "job 13");
  }
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 50);
}

TEST(WriteExperiment, FilesAndManifest) {
  const auto dir = scratch("write");
  const auto r = run_experiment(quick(ExperimentKind::kOracleCompare, 5, 2));
  const auto files = write_experiment(r, dir);
  for (const char* f : {"oracle_compare_alg1.csv", "oracle_compare_alg1_per_seed.csv",
                        "oracle_compare_oracle.csv", "oracle_compare_oracle_per_seed.csv",
                        "oracle_compare_manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(files.size(), 5u);
  const auto m = Json::parse(slurp(dir / "oracle_compare_manifest.json"));
  for (const char* key : {"format", "config", "threads", "run_seeds", "dims", "csv_columns", "metric",
                          "final_values", "files"}) {
    EXPECT_TRUE(m.contains(key)) << key;
  }
  EXPECT_EQ(m["files"].size(), 5u);
  EXPECT_EQ(m["config"]["data"]["noise_std_defaulted"], true);
  EXPECT_EQ(m["run_seeds"].size(), 2u);
  const auto per_seed = lines_of(slurp(dir / "oracle_compare_alg1_per_seed.csv"));
  EXPECT_EQ(std::count(per_seed[0].begin(), per_seed[0].end(), ','), 2);
  fs::remove_all(dir);
}

TEST(WriteExperiment, SameSeedSameBytes) {
  const auto a = scratch("bytes_a"), b = scratch("bytes_b");
  write_experiment(run_experiment(quick(ExperimentKind::kOnline, 15, 2)), a);
  write_experiment(run_experiment(quick(ExperimentKind::kOnline, 15, 2)), b);
  EXPECT_EQ(slurp(a / "online.csv"), slurp(b / "online.csv"));
  EXPECT_EQ(slurp(a / "online_manifest.json"), slurp(b / "online_manifest.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(DefaultOutputDir, FromEnvironment) {
  ::setenv("PERSFL_OUT_DIR", "/tmp/elsewhere", 1);
  EXPECT_EQ(default_output_dir(), fs::path("/tmp/elsewhere"));
  ::unsetenv("PERSFL_OUT_DIR");
  EXPECT_EQ(default_output_dir(), fs::path("results"));
}

}  // namespace
