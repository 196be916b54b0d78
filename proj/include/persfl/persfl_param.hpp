#pragma once

// Parametric peer selection by simulated gradient steps.
//
// Each round the target device draws S peers (never itself), simulates one
// gradient step of its current parameters on every peer's loss, and adopts
// the step that leaves its own local loss smallest. The target's data is only
// ever used to score candidates.

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "persfl/linmodel.hpp"
#include "persfl/metrics.hpp"
#include "persfl/rng.hpp"
#include "persfl/synthdata.hpp"

namespace persfl {

enum class InitKind { kZero, kLocalPretrain };

struct Alg1Config {
  double eta = 0.05;
  std::size_t rounds = 500;
  std::size_t candidate_count = 20;
  std::size_t target_device = 0;
  InitKind init = InitKind::kZero;
  double pretrain_penalty = 1e-3;
  std::uint64_t seed = 0;

  void validate(std::size_t n_devices) const {
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (n_devices < 2) throw ConfigError("federation needs at least two devices");
    if (target_device >= n_devices) throw ConfigError("target_device out of range");
    if (candidate_count < 1 || candidate_count > n_devices - 1) {
      throw ConfigError("candidate_count must lie in [1, " + std::to_string(n_devices - 1) +
                        "], got " + std::to_string(candidate_count));
    }
  }
};

// Audit entry for one round. `candidates` is ascending, `rewards` is aligned
// with it.
struct SelectionRecord {
  std::size_t round = 0;
  std::vector<std::size_t> candidates;
  std::vector<double> rewards;
  std::size_t chosen = 0;
  double target_loss_after = 0.0;
};

struct Alg1Result {
  LinearParams params;
  std::vector<SelectionRecord> records;
  std::vector<double> mse;  // mse[k]: ||w - wbar_target||^2 after k rounds
};

// current - eta * grad L_peer(current)
inline LinearParams probe_gradient_step(const LinearParams& current, const LocalDataset& peer_data,
                                        double eta) {
  return LinearParams(current.weights - eta * loss_gradient(current, peer_data));
}

// Decrease of the target's local loss when moving from `current` to `candidate`.
inline double reward(const LocalDataset& target_data, const LinearParams& current,
                     const LinearParams& candidate) {
  return squared_loss(current, target_data) - squared_loss(candidate, target_data);
}

// (-2/|B|) sum_{(x,y) in B} x (y - x^T w), accumulated sample by sample.
inline Vector batch_gradient_estimate(const LinearParams& current, const LocalDataset& batch) {
  detail::require_dims(current.dim(), batch.dim(), "batch_gradient_estimate");
  if (batch.empty()) throw DimensionError("batch_gradient_estimate: empty batch");
  Vector g = Vector::Zero(static_cast<Eigen::Index>(current.dim()));
  for (Eigen::Index r = 0; r < batch.features.rows(); ++r) {
    const double residual = batch.labels(r) - batch.features.row(r).dot(current.weights);
    g += residual * batch.features.row(r).transpose();
  }
  return (-2.0 / static_cast<double>(batch.size())) * g;
}

inline std::vector<std::size_t> peers_of(std::size_t n_devices, std::size_t target) {
  std::vector<std::size_t> pool;
  pool.reserve(n_devices - 1);
  for (std::size_t i = 0; i < n_devices; ++i) {
    if (i != target) pool.push_back(i);
  }
  return pool;
}

inline LinearParams initial_params(const Federation& fed, const Alg1Config& cfg) {
  if (cfg.init == InitKind::kLocalPretrain) {
    return ridge_fit(fed.at(cfg.target_device), cfg.pretrain_penalty);
  }
  return LinearParams::zeros(fed.dim());
}

namespace detail {

inline void require_finite(const LinearParams& w, std::size_t round) {
  if (!w.all_finite()) {
    throw UndefinedError("parameters diverged at round " + std::to_string(round) +
                         "; reduce eta");
  }
}

// Shared round loop. `peer_gradient(round, peer, w)` supplies the gradient
// (exact or estimated) of peer's loss at w.
template <typename PeerGradient>
Alg1Result run_probing(const Federation& fed, const Alg1Config& cfg, PeerGradient&& peer_gradient) {
  cfg.validate(fed.size());
  const auto& target_data = fed.at(cfg.target_device);
  const Vector& truth = fed.truth.truth_for(cfg.target_device);
  const auto pool = peers_of(fed.size(), cfg.target_device);
  Engine rng = make_engine(cfg.seed, Stream::kCandidates, cfg.target_device);

  Alg1Result out;
  out.params = initial_params(fed, cfg);
  out.records.reserve(cfg.rounds);
  out.mse.reserve(cfg.rounds + 1);
  out.mse.push_back(param_mse(out.params, truth));

  std::vector<LinearParams> probes;
  for (std::size_t k = 1; k <= cfg.rounds; ++k) {
    SelectionRecord rec;
    rec.round = k;
    rec.candidates = sample_without_replacement(pool, cfg.candidate_count, rng);
    std::sort(rec.candidates.begin(), rec.candidates.end());

    const double loss_before = squared_loss(out.params, target_data);
    probes.clear();
    rec.rewards.reserve(rec.candidates.size());
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::size_t c = 0; c < rec.candidates.size(); ++c) {
      LinearParams probe(out.params.weights -
                         cfg.eta * peer_gradient(k, rec.candidates[c], out.params));
      const double loss_after = squared_loss(probe, target_data);
      rec.rewards.push_back(loss_before - loss_after);
      // Strict comparison: ties keep the lowest device index.
      if (loss_after < best_loss || c == 0) {
        best_loss = loss_after;
        best = c;
      }
      probes.push_back(std::move(probe));
    }
    rec.chosen = rec.candidates[best];
    rec.target_loss_after = best_loss;
    out.params = std::move(probes[best]);
    require_finite(out.params, k);
    out.mse.push_back(param_mse(out.params, truth));
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace detail

inline Alg1Result run_algorithm1(const Federation& fed, const Alg1Config& cfg) {
  return detail::run_probing(fed, cfg, [&](std::size_t, std::size_t peer, const LinearParams& w) {
    return loss_gradient(w, fed.at(peer));
  });
}

// Online variant: every probe uses a fresh batch of `batch_size` samples from
// the peer's generating distribution instead of its stored dataset. Batches
// depend only on (seed, round, peer), never on evaluation order.
inline Alg1Result run_algorithm1_online(const Federation& fed, const Alg1Config& cfg,
                                        std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  return detail::run_probing(
      fed, cfg, [&](std::size_t round, std::size_t peer, const LinearParams& w) {
        Engine rng = make_engine(cfg.seed, Stream::kOnlineBatch, round, peer);
        return batch_gradient_estimate(w, draw_device_batch(fed, peer, batch_size, rng));
      });
}

// Fraction of records after `burn_in` whose chosen peer shares the target's
// true cluster.
inline double selection_accuracy(const Federation& fed, std::size_t target,
                                 const std::vector<SelectionRecord>& records,
                                 std::size_t burn_in) {
  std::size_t hits = 0, total = 0;
  const auto cluster = fed.truth.device_to_cluster.at(target);
  for (const auto& r : records) {
    if (r.round <= burn_in) continue;
    ++total;
    if (fed.truth.device_to_cluster.at(r.chosen) == cluster) ++hits;
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace persfl
