#pragma once

// Comparison methods: IFCA, a cluster-oracle peer sampler, local-only
// training and a model fit on the pooled data of the target's true cluster.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "persfl/hypothesis.hpp"
#include "persfl/metrics.hpp"
#include "persfl/persfl_agnostic.hpp"
#include "persfl/persfl_param.hpp"
#include "persfl/rng.hpp"
#include "persfl/synthdata.hpp"

namespace persfl {

struct IfcaConfig {
  std::size_t k_assumed = 2;
  double eta = 0.05;
  std::size_t rounds = 500;
  double init_scale = 1.0;
  std::size_t target_device = 0;
  std::uint64_t seed = 0;

  void validate(std::size_t n_devices) const {
    if (k_assumed < 1) throw ConfigError("k_assumed must be at least 1");
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (!(init_scale >= 0.0)) throw ConfigError("init_scale must be nonnegative");
    if (target_device >= n_devices) throw ConfigError("target_device out of range");
  }
};

struct IfcaResult {
  std::vector<LinearParams> models;
  // assignments[k][i]: cluster model of device i used in round k; [0] is the
  // assignment under the initial models.
  std::vector<std::vector<std::size_t>> assignments;
  std::vector<double> mse;  // target's assigned model vs its true parameters
};

namespace detail {

inline std::vector<std::size_t> ifca_assign(const Federation& fed,
                                            const std::vector<LinearParams>& models) {
  std::vector<std::size_t> a(fed.size(), 0);
  for (std::size_t i = 0; i < fed.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < models.size(); ++j) {
      const double l = squared_loss(models[j], fed.datasets[i]);
      if (l < best) {
        best = l;
        a[i] = j;
      }
    }
  }
  return a;
}

}  // namespace detail

// Per round: every device joins the cluster model with the lowest local loss,
// then each model takes one step along the mean gradient of its members.
// Models without members stay unchanged for that round.
inline IfcaResult run_ifca(const Federation& fed, const IfcaConfig& cfg,
                           std::optional<std::vector<LinearParams>> initial_models = std::nullopt) {
  cfg.validate(fed.size());
  IfcaResult out;
  if (initial_models) {
    if (initial_models->size() != cfg.k_assumed) {
      throw ConfigError("initial_models must hold k_assumed entries");
    }
    for (const auto& m : *initial_models) detail::require_dims(m.dim(), fed.dim(), "run_ifca");
    out.models = std::move(*initial_models);
  } else {
    Engine rng = make_engine(cfg.seed, Stream::kIfcaInit);
    std::uniform_real_distribution<double> uniform(-cfg.init_scale, cfg.init_scale);
    for (std::size_t j = 0; j < cfg.k_assumed; ++j) {
      Vector w(static_cast<Eigen::Index>(fed.dim()));
      for (Eigen::Index c = 0; c < w.size(); ++c) w(c) = uniform(rng);
      out.models.emplace_back(std::move(w));
    }
  }

  const Vector& truth = fed.truth.truth_for(cfg.target_device);
  out.assignments.reserve(cfg.rounds + 1);
  out.mse.reserve(cfg.rounds + 1);
  out.assignments.push_back(detail::ifca_assign(fed, out.models));
  out.mse.push_back(param_mse(out.models[out.assignments[0][cfg.target_device]], truth));

  for (std::size_t k = 1; k <= cfg.rounds; ++k) {
    auto assign = detail::ifca_assign(fed, out.models);
    std::vector<Vector> grad_sum(cfg.k_assumed, Vector::Zero(static_cast<Eigen::Index>(fed.dim())));
    std::vector<std::size_t> members(cfg.k_assumed, 0);
    for (std::size_t i = 0; i < fed.size(); ++i) {
      grad_sum[assign[i]] += loss_gradient(out.models[assign[i]], fed.datasets[i]);
      ++members[assign[i]];
    }
    for (std::size_t j = 0; j < cfg.k_assumed; ++j) {
      if (members[j] == 0) continue;
      out.models[j].weights -= (cfg.eta / static_cast<double>(members[j])) * grad_sum[j];
      detail::require_finite(out.models[j], k);
    }
    out.mse.push_back(param_mse(out.models[assign[cfg.target_device]], truth));
    out.assignments.push_back(std::move(assign));
  }
  return out;
}

struct OracleSamplerResult {
  LinearParams params;
  std::vector<std::size_t> chosen;  // chosen[k-1]: peer used in round k
  std::vector<double> mse;
};

// Like run_algorithm1, but the probed peer is drawn uniformly from the
// target's true cluster and its gradient step is always applied.
inline OracleSamplerResult run_oracle_sampler(const Federation& fed, const Alg1Config& cfg) {
  if (!(cfg.eta > 0.0)) throw ConfigError("eta must be positive");
  if (cfg.target_device >= fed.size()) throw ConfigError("target_device out of range");
  auto peers = fed.truth.members(fed.truth.device_to_cluster.at(cfg.target_device));
  std::erase(peers, cfg.target_device);
  if (peers.empty()) throw ConfigError("target's cluster has no other member");

  const Vector& truth = fed.truth.truth_for(cfg.target_device);
  Engine rng = make_engine(cfg.seed, Stream::kCandidates, cfg.target_device);
  std::uniform_int_distribution<std::size_t> pick(0, peers.size() - 1);

  OracleSamplerResult out{initial_params(fed, cfg), {}, {}};
  out.chosen.reserve(cfg.rounds);
  out.mse.push_back(param_mse(out.params, truth));
  for (std::size_t k = 1; k <= cfg.rounds; ++k) {
    const std::size_t peer = peers[pick(rng)];
    out.params = probe_gradient_step(out.params, fed.at(peer), cfg.eta);
    detail::require_finite(out.params, k);
    out.chosen.push_back(peer);
    out.mse.push_back(param_mse(out.params, truth));
  }
  return out;
}

inline Hypothesis train_local_only(const LocalDataset& target_data, const ModelSpec& model) {
  return fit_model(target_data, model);
}

// Fit on the pooled datasets of every device in the target's true cluster.
inline Hypothesis train_cluster_oracle_model(const Federation& fed, std::size_t target,
                                             const ModelSpec& model) {
  const auto members = fed.truth.members(fed.truth.device_to_cluster.at(target));
  Eigen::Index rows = 0;
  for (auto i : members) rows += fed.datasets[i].features.rows();
  Matrix x(rows, static_cast<Eigen::Index>(fed.dim()));
  Vector y(rows);
  Eigen::Index at = 0;
  for (auto i : members) {
    const auto& ds = fed.datasets[i];
    x.middleRows(at, ds.features.rows()) = ds.features;
    y.segment(at, ds.labels.size()) = ds.labels;
    at += ds.features.rows();
  }
  return fit_model(LocalDataset(std::move(x), std::move(y)), model);
}

}  // namespace persfl
