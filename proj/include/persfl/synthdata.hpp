#pragma once

// Clustered noisy-linear-model federations.
//
// Every device i belongs to one cluster c(i); its samples follow
//   x ~ N(0, I_d),   y = x^T wbar_c(i) + sigma * eps,   eps ~ N(0, 1),
// with the per-cluster vectors wbar_c drawn i.i.d. uniformly from param_range.
// Devices are assigned to clusters in contiguous blocks, so device 0 is in
// cluster 0. All draws come from independent streams of one master seed, so
// changing sigma leaves features and the unit noise draws untouched.

#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "persfl/dataset.hpp"
#include "persfl/error.hpp"
#include "persfl/rng.hpp"

namespace persfl {

struct SyntheticSpec {
  std::size_t n_devices = 100;
  std::size_t samples_per_device = 10;
  std::size_t dim = 2;
  double noise_std = 0.0;
  std::vector<std::size_t> cluster_sizes{50, 50};
  std::pair<double, double> param_range{-5.0, 5.0};
  std::uint64_t seed = 0;

  std::size_t n_clusters() const noexcept { return cluster_sizes.size(); }

  void validate() const {
    if (n_devices == 0) throw ConfigError("n_devices must be positive");
    if (samples_per_device == 0) throw ConfigError("samples_per_device must be positive");
    if (dim == 0) throw ConfigError("dim must be positive");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be nonnegative");
    if (cluster_sizes.empty()) throw ConfigError("cluster_sizes must be nonempty");
    for (auto s : cluster_sizes) {
      if (s == 0) throw ConfigError("cluster sizes must be positive");
    }
    const auto total = std::accumulate(cluster_sizes.begin(), cluster_sizes.end(), std::size_t{0});
    if (total != n_devices) {
      throw ConfigError("cluster sizes sum to " + std::to_string(total) + " but n_devices is " +
                        std::to_string(n_devices));
    }
    if (!(param_range.first <= param_range.second)) {
      throw ConfigError("param_range lower bound exceeds upper bound");
    }
  }
};

struct ClusterAssignment {
  std::vector<std::size_t> device_to_cluster;
  std::vector<Vector> cluster_params;

  const Vector& truth_for(std::size_t device) const {
    return cluster_params.at(device_to_cluster.at(device));
  }

  std::vector<std::size_t> members(std::size_t cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < device_to_cluster.size(); ++i) {
      if (device_to_cluster[i] == cluster) out.push_back(i);
    }
    return out;
  }
};

struct Federation {
  std::vector<LocalDataset> datasets;
  ClusterAssignment truth;
  SyntheticSpec spec;

  std::size_t size() const noexcept { return datasets.size(); }
  std::size_t dim() const noexcept { return spec.dim; }

  const LocalDataset& at(std::size_t device) const {
    if (device >= datasets.size()) {
      throw ConfigError("device index " + std::to_string(device) + " out of range (n=" +
                        std::to_string(datasets.size()) + ")");
    }
    return datasets[device];
  }
};

namespace detail {

inline Matrix standard_normal_matrix(std::size_t rows, std::size_t cols, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = normal(rng);
  }
  return out;
}

inline Vector standard_normal_vector(std::size_t n, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < out.size(); ++r) out(r) = normal(rng);
  return out;
}

inline LocalDataset labeled_samples(const Vector& wbar, double sigma, std::size_t count,
                                    Engine& feature_rng, Engine& noise_rng) {
  Matrix x = standard_normal_matrix(count, static_cast<std::size_t>(wbar.size()), feature_rng);
  Vector eps = standard_normal_vector(count, noise_rng);
  Vector y = x * wbar;
  if (sigma != 0.0) y += sigma * eps;
  return LocalDataset(std::move(x), std::move(y));
}

}  // namespace detail

inline Federation generate_federation(const SyntheticSpec& spec) {
  spec.validate();
  Federation fed;
  fed.spec = spec;

  Engine param_rng = make_engine(spec.seed, Stream::kClusterParams);
  std::uniform_real_distribution<double> uniform(spec.param_range.first, spec.param_range.second);
  fed.truth.cluster_params.reserve(spec.n_clusters());
  for (std::size_t c = 0; c < spec.n_clusters(); ++c) {
    Vector w(static_cast<Eigen::Index>(spec.dim));
    for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = uniform(param_rng);
    fed.truth.cluster_params.push_back(std::move(w));
  }

  fed.truth.device_to_cluster.reserve(spec.n_devices);
  for (std::size_t c = 0; c < spec.n_clusters(); ++c) {
    fed.truth.device_to_cluster.insert(fed.truth.device_to_cluster.end(), spec.cluster_sizes[c], c);
  }

  fed.datasets.reserve(spec.n_devices);
  for (std::size_t i = 0; i < spec.n_devices; ++i) {
    Engine feature_rng = make_engine(spec.seed, Stream::kFeatures, i);
    Engine noise_rng = make_engine(spec.seed, Stream::kNoise, i);
    fed.datasets.push_back(detail::labeled_samples(fed.truth.truth_for(i), spec.noise_std,
                                                   spec.samples_per_device, feature_rng,
                                                   noise_rng));
  }
  return fed;
}

// Unlabeled i.i.d. N(0, I_dim) points, one per row.
inline Matrix generate_unlabeled_test_set(std::size_t count, std::size_t dim, std::uint64_t seed) {
  if (count == 0 || dim == 0) throw ConfigError("test set count and dim must be positive");
  Engine rng = make_engine(seed, Stream::kTestSet);
  return detail::standard_normal_matrix(count, dim, rng);
}

// Fresh labeled samples from the generating distribution of `device`,
// independent of its training data.
inline LocalDataset generate_validation_set(std::size_t device, const Federation& fed,
                                            std::size_t count, std::uint64_t seed) {
  fed.at(device);
  if (count == 0) throw ConfigError("validation set count must be positive");
  Engine feature_rng = make_engine(seed, Stream::kValidation, device, 0);
  Engine noise_rng = make_engine(seed, Stream::kValidation, device, 1);
  return detail::labeled_samples(fed.truth.truth_for(device), fed.spec.noise_std, count,
                                 feature_rng, noise_rng);
}

// Streaming access: `count` new samples from `device`'s distribution drawn
// from the caller's engine.
inline LocalDataset draw_device_batch(const Federation& fed, std::size_t device,
                                      std::size_t count, Engine& rng) {
  fed.at(device);
  if (count == 0) throw ConfigError("batch size must be positive");
  return detail::labeled_samples(fed.truth.truth_for(device), fed.spec.noise_std, count, rng, rng);
}

}  // namespace persfl
