#pragma once

// Model-agnostic peer selection.
//
// A probe replaces the gradient step by a regularized refit
//   h~ = argmin_h  eta * L_peer(h) + (1/m_t) sum_{x in D_t} (h(x) - h^(x))^2,
// which for squared loss is a weighted fit on the peer's samples (weight
// eta/m_peer each) together with the shared test points labeled by the
// current hypothesis h^ (weight 1/m_t each).

#include <limits>
#include <string>
#include <vector>

#include "persfl/hypothesis.hpp"
#include "persfl/metrics.hpp"
#include "persfl/persfl_param.hpp"
#include "persfl/regtree.hpp"
#include "persfl/rng.hpp"
#include "persfl/synthdata.hpp"

namespace persfl {

enum class ModelKind { kTree, kLinear };

struct ModelSpec {
  ModelKind kind = ModelKind::kTree;
  TreeOptions tree{};

  static ModelSpec tree_of_depth(std::size_t depth, std::size_t min_leaf = 1) {
    return ModelSpec{ModelKind::kTree, TreeOptions{depth, min_leaf}};
  }
  static ModelSpec linear() { return ModelSpec{ModelKind::kLinear, {}}; }
};

struct Alg2Config {
  double eta = 1.0;
  std::size_t rounds = 500;
  std::size_t candidate_count = 20;
  std::size_t target_device = 0;
  Matrix test_set;
  ModelSpec model{};
  std::uint64_t seed = 0;

  void validate(std::size_t n_devices, std::size_t dim) const {
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (n_devices < 2) throw ConfigError("federation needs at least two devices");
    if (target_device >= n_devices) throw ConfigError("target_device out of range");
    if (candidate_count < 1 || candidate_count > n_devices - 1) {
      throw ConfigError("candidate_count must lie in [1, " + std::to_string(n_devices - 1) + "]");
    }
    if (test_set.rows() == 0) throw ConfigError("test set must be nonempty");
    if (static_cast<std::size_t>(test_set.cols()) != dim) {
      throw DimensionError("test set dimension does not match the federation");
    }
  }
};

struct Alg2Result {
  Hypothesis hypothesis;
  std::vector<SelectionRecord> records;
  std::vector<double> validation_mse;  // [k]: summed squared error after k rounds
};

// (1/|D_t|) sum_{x in D_t} (a(x) - b(x))^2
inline double prediction_deviation(const Hypothesis& a, const Hypothesis& b, const Matrix& test_set) {
  if (test_set.rows() == 0) throw ConfigError("prediction_deviation: empty test set");
  return (predict_rows(a, test_set) - predict_rows(b, test_set)).squaredNorm() /
         static_cast<double>(test_set.rows());
}

inline Hypothesis fit_model(const Matrix& x, const Vector& y, const Vector& w,
                            const ModelSpec& model) {
  if (model.kind == ModelKind::kTree) return fit_tree(x, y, w, model.tree);
  return weighted_least_squares_fit(x, y, w);
}

// Unweighted fit on one dataset; linear models use the minimum-norm solution.
inline Hypothesis fit_model(const LocalDataset& data, const ModelSpec& model) {
  if (data.empty()) throw ConfigError("cannot fit a model on an empty dataset");
  if (model.kind == ModelKind::kTree) return fit_tree(data, model.tree);
  return least_squares_fit(data);
}

namespace detail {

// Augmented weighted fit given precomputed pseudo-labels anchor(D_t).
inline Hypothesis augmented_fit(const Vector& pseudo_labels, const LocalDataset& peer_data,
                                const Matrix& test_set, double eta, const ModelSpec& model) {
  const bool keep_peer = eta > 0.0;
  const Eigen::Index mp = keep_peer ? peer_data.features.rows() : 0;
  const Eigen::Index mt = test_set.rows();
  Matrix x(mp + mt, test_set.cols());
  Vector y(mp + mt), w(mp + mt);
  if (keep_peer) {
    x.topRows(mp) = peer_data.features;
    y.head(mp) = peer_data.labels;
    w.head(mp).setConstant(eta / static_cast<double>(peer_data.size()));
  }
  x.bottomRows(mt) = test_set;
  y.tail(mt) = pseudo_labels;
  w.tail(mt).setConstant(1.0 / static_cast<double>(mt));
  return fit_model(x, y, w, model);
}

}  // namespace detail

inline Hypothesis agnostic_update(const Hypothesis& anchor, const LocalDataset& peer_data,
                                  const Matrix& test_set, double eta, const ModelSpec& model) {
  if (peer_data.empty()) throw ConfigError("agnostic_update: empty peer dataset");
  if (test_set.rows() == 0) throw ConfigError("agnostic_update: empty test set");
  if (peer_data.features.cols() != test_set.cols()) {
    throw DimensionError("agnostic_update: peer and test feature dimensions differ");
  }
  if (!(eta >= 0.0)) throw ConfigError("agnostic_update: eta must be nonnegative");
  return detail::augmented_fit(predict_rows(anchor, test_set), peer_data, test_set, eta, model);
}

// The validation set is only used for reporting; candidates are scored by
// the target's local loss on its own dataset.
inline Alg2Result run_algorithm2(const Federation& fed, const Alg2Config& cfg,
                                 const LocalDataset& validation) {
  cfg.validate(fed.size(), fed.dim());
  const auto& target_data = fed.at(cfg.target_device);
  const auto pool = peers_of(fed.size(), cfg.target_device);
  Engine rng = make_engine(cfg.seed, Stream::kCandidates, cfg.target_device);

  Alg2Result out{fit_model(target_data, cfg.model), {}, {}};
  out.records.reserve(cfg.rounds);
  out.validation_mse.reserve(cfg.rounds + 1);
  out.validation_mse.push_back(validation_mse(out.hypothesis, validation));

  std::vector<Hypothesis> probes;
  for (std::size_t k = 1; k <= cfg.rounds; ++k) {
    SelectionRecord rec;
    rec.round = k;
    rec.candidates = sample_without_replacement(pool, cfg.candidate_count, rng);
    std::sort(rec.candidates.begin(), rec.candidates.end());

    const Vector pseudo = predict_rows(out.hypothesis, cfg.test_set);
    const double loss_before = empirical_loss(out.hypothesis, target_data);
    probes.clear();
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::size_t c = 0; c < rec.candidates.size(); ++c) {
      probes.push_back(detail::augmented_fit(pseudo, fed.at(rec.candidates[c]), cfg.test_set,
                                             cfg.eta, cfg.model));
      const double loss_after = empirical_loss(probes.back(), target_data);
      rec.rewards.push_back(loss_before - loss_after);
      if (loss_after < best_loss || c == 0) {
        best_loss = loss_after;
        best = c;
      }
    }
    rec.chosen = rec.candidates[best];
    rec.target_loss_after = best_loss;
    out.hypothesis = std::move(probes[best]);
    out.validation_mse.push_back(validation_mse(out.hypothesis, validation));
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace persfl
