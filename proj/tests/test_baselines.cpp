#include <gtest/gtest.h>

#include <algorithm>

#include "persfl/baselines.hpp"

namespace {

using namespace persfl;

SyntheticSpec spec_of(std::size_t n, std::size_t m, std::size_t d, double sigma,
                      std::vector<std::size_t> sizes, std::uint64_t seed) {
  SyntheticSpec s;
  s.n_devices = n;
  s.samples_per_device = m;
  s.dim = d;
  s.noise_std = sigma;
  s.cluster_sizes = std::move(sizes);
  s.seed = seed;
  return s;
}

IfcaConfig ifca(std::size_t k, std::size_t rounds, std::uint64_t seed) {
  IfcaConfig c;
  c.k_assumed = k;
  c.rounds = rounds;
  c.seed = seed;
  return c;
}

TEST(Ifca, SingleModelTakesEveryDevice) {
  const auto fed = generate_federation(spec_of(20, 10, 2, 0.0, {10, 10}, 1));
  const auto res = run_ifca(fed, ifca(1, 30, 1));
  ASSERT_EQ(res.assignments.size(), 31u);
  for (const auto& a : res.assignments) {
    EXPECT_TRUE(std::all_of(a.begin(), a.end(), [](std::size_t c) { return c == 0; }));
  }
}

TEST(Ifca, WellSpecifiedConverges) {
  // Some random initializations put both models on one cluster, so the
  // fraction is measured over many seeds rather than five.
  std::size_t reached = 0;
  const std::size_t seeds = 100;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const auto fed = generate_federation(spec_of(100, 10, 2, 0.0, {50, 50}, 200 + s));
    const auto res = run_ifca(fed, ifca(2, 300, 200 + s));
    if (*std::min_element(res.mse.begin(), res.mse.end()) <= 1e-3) ++reached;
  }
  EXPECT_GE(reached, seeds * 4 / 5);
}

TEST(Ifca, AssignmentsStableAtConvergence) {
  const auto fed = generate_federation(spec_of(100, 10, 2, 0.0, {50, 50}, 201));
  const auto res = run_ifca(fed, ifca(2, 500, 201));
  ASSERT_LE(res.mse.back(), 1e-6);
  for (std::size_t k = res.assignments.size() - 10; k < res.assignments.size(); ++k) {
    EXPECT_EQ(res.assignments[k], res.assignments.back());
  }
}

TEST(Ifca, OneModelPerDeviceIsLocalGradientDescent) {
  const auto fed = generate_federation(spec_of(3, 10, 2, 0.1, {1, 1, 1}, 3));
  // Start each model at its device's local least-squares fit nudged slightly,
  // so each device keeps choosing its own model.
  std::vector<LinearParams> init;
  for (std::size_t i = 0; i < 3; ++i) {
    init.emplace_back(least_squares_fit(fed.at(i)).weights + Vector::Constant(2, 0.01));
  }
  auto cfg = ifca(3, 50, 3);
  const auto res = run_ifca(fed, cfg, init);
  for (std::size_t i = 0; i < 3; ++i) {
    LinearParams w = init[i];
    for (std::size_t k = 0; k < 50; ++k) w = probe_gradient_step(w, fed.at(i), cfg.eta);
    EXPECT_LE((res.models[i].weights - w.weights).norm(), 1e-12) << "device " << i;
    EXPECT_EQ(res.assignments.back()[i], i);
  }
}

TEST(Ifca, EmptyClusterIsFrozen) {
  const auto fed = generate_federation(spec_of(4, 10, 2, 0.0, {2, 2}, 4));
  std::vector<LinearParams> init{LinearParams::zeros(2), LinearParams(Vector::Constant(2, 1e6))};
  const auto res = run_ifca(fed, ifca(2, 5, 4), init);
  EXPECT_EQ(res.models[1].weights, Vector::Constant(2, 1e6));
}

TEST(Ifca, DeterministicAndValidated) {
  const auto fed = generate_federation(spec_of(20, 10, 2, 0.0, {10, 10}, 5));
  EXPECT_EQ(run_ifca(fed, ifca(2, 20, 5)).mse, run_ifca(fed, ifca(2, 20, 5)).mse);
  EXPECT_THROW(run_ifca(fed, ifca(0, 20, 5)), ConfigError);
  EXPECT_THROW(run_ifca(fed, ifca(2, 20, 5), std::vector<LinearParams>{LinearParams::zeros(2)}),
               ConfigError);
}

Alg1Config alg1(std::size_t rounds, std::uint64_t seed) {
  Alg1Config c;
  c.rounds = rounds;
  c.seed = seed;
  return c;
}

TEST(OracleSampler, PeersAlwaysInTargetCluster) {
  const auto fed = generate_federation(spec_of(100, 10, 20, 0.0, {50, 50}, 6));
  auto cfg = alg1(300, 6);
  cfg.target_device = 70;
  const auto res = run_oracle_sampler(fed, cfg);
  ASSERT_EQ(res.chosen.size(), 300u);
  for (auto p : res.chosen) {
    EXPECT_NE(p, 70u);
    EXPECT_EQ(fed.truth.device_to_cluster[p], 1u);
  }
  EXPECT_LT(res.mse[300], res.mse[0]);
}

TEST(OracleSampler, TwoDeviceClusterAlwaysPicksPeer) {
  const auto fed = generate_federation(spec_of(5, 10, 2, 0.0, {2, 3}, 7));
  const auto res = run_oracle_sampler(fed, alg1(20, 7));
  for (auto p : res.chosen) EXPECT_EQ(p, 1u);
}

TEST(OracleSampler, LoneTargetIsAnError) {
  const auto fed = generate_federation(spec_of(3, 10, 2, 0.0, {1, 2}, 7));
  EXPECT_THROW(run_oracle_sampler(fed, alg1(5, 7)), ConfigError);
}

TEST(LocalOnly, NoiselessWellPosedRecoversTruth) {
  const auto fed = generate_federation(spec_of(2, 10, 3, 0.0, {1, 1}, 8));
  const auto h = std::get<LinearParams>(train_local_only(fed.at(0), ModelSpec::linear()));
  EXPECT_LE((h.weights - fed.truth.truth_for(0)).norm(), 1e-10);
}

TEST(LocalOnly, MinimumNormWhenUnderdetermined) {
  const auto fed = generate_federation(spec_of(2, 4, 10, 0.0, {1, 1}, 9));
  const auto& data = fed.at(0);
  const auto h = std::get<LinearParams>(train_local_only(data, ModelSpec::linear()));
  EXPECT_LE((data.features * h.weights - data.labels).norm(), 1e-10);
  // Minimum-norm: the solution lies in the row space of X.
  const Matrix pinv = data.features.transpose() *
                      (data.features * data.features.transpose()).inverse();
  EXPECT_LE((h.weights - pinv * data.labels).norm(), 1e-9);
}

TEST(LocalOnly, TreeOfDepthThree) {
  const auto fed = generate_federation(spec_of(2, 10, 2, 0.0, {1, 1}, 10));
  const auto h = std::get<RegressionTree>(train_local_only(fed.at(0), ModelSpec::tree_of_depth(3)));
  EXPECT_LE(h.depth(), 3u);
}

TEST(ClusterOracle, LinearPooledFitRecoversTruth) {
  const auto fed = generate_federation(spec_of(100, 10, 20, 0.0, {50, 50}, 11));
  const auto h = std::get<LinearParams>(train_cluster_oracle_model(fed, 0, ModelSpec::linear()));
  EXPECT_LE((h.weights - fed.truth.truth_for(0)).norm(), 1e-8);
}

TEST(ClusterOracle, SingleDeviceClusterEqualsLocal) {
  const auto fed = generate_federation(spec_of(3, 10, 2, 0.3, {1, 2}, 12));
  const auto model = ModelSpec::tree_of_depth(3);
  const auto a = std::get<RegressionTree>(train_cluster_oracle_model(fed, 0, model));
  const auto b = std::get<RegressionTree>(train_local_only(fed.at(0), model));
  EXPECT_TRUE(a.same_structure(b));
  EXPECT_EQ(a.to_text(), b.to_text());
}

TEST(ClusterOracle, PooledTreeBeatsLocalTree) {
  std::size_t better = 0;
  const std::size_t seeds = 20;
  const auto model = ModelSpec::tree_of_depth(3);
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const auto fed = generate_federation(spec_of(100, 10, 2, 0.0, {50, 50}, 300 + s));
    const auto val = generate_validation_set(0, fed, 100, 300 + s);
    if (validation_mse(train_cluster_oracle_model(fed, 0, model), val) <=
        validation_mse(train_local_only(fed.at(0), model), val)) {
      ++better;
    }
  }
  EXPECT_GE(better, seeds * 9 / 10);
}

}  // namespace
