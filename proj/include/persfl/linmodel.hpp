#pragma once

// Homogeneous linear hypothesis h(x) = w^T x with squared-error loss
//   L(w) = (1/m) ||y - X w||^2.

#include <cmath>
#include <string>

#include "persfl/dataset.hpp"
#include "persfl/error.hpp"

namespace persfl {

struct LinearParams {
  Vector weights;

  LinearParams() = default;
  explicit LinearParams(Vector w) : weights(std::move(w)) {}

  static LinearParams zeros(std::size_t dim) {
    return LinearParams(Vector::Zero(static_cast<Eigen::Index>(dim)));
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(weights.size()); }
  bool all_finite() const { return weights.allFinite(); }

  friend bool operator==(const LinearParams& a, const LinearParams& b) {
    return a.weights.size() == b.weights.size() && a.weights == b.weights;
  }
};

namespace detail {

inline void require_dims(std::size_t params_dim, std::size_t data_dim, const char* where) {
  if (params_dim != data_dim) {
    throw DimensionError(std::string(where) + ": parameter dimension " +
                         std::to_string(params_dim) + " != feature dimension " +
                         std::to_string(data_dim));
  }
}

}  // namespace detail

inline double squared_loss(const LinearParams& params, const LocalDataset& data) {
  detail::require_dims(params.dim(), data.dim(), "squared_loss");
  if (data.empty()) throw DimensionError("squared_loss: empty dataset");
  return (data.labels - data.features * params.weights).squaredNorm() /
         static_cast<double>(data.size());
}

// (-2/m) X^T (y - X w)
inline Vector loss_gradient(const LinearParams& params, const LocalDataset& data) {
  detail::require_dims(params.dim(), data.dim(), "loss_gradient");
  if (data.empty()) throw DimensionError("loss_gradient: empty dataset");
  const Vector residual = data.labels - data.features * params.weights;
  return (-2.0 / static_cast<double>(data.size())) * (data.features.transpose() * residual);
}

// argmin_w  eta * L(w) + ||w - anchor||^2, solved from
//   ((2 eta/m) X^T X + 2 I) w = (2 eta/m) X^T y + 2 anchor.
inline LinearParams proximal_least_squares(const LinearParams& anchor, const LocalDataset& data,
                                           double eta) {
  detail::require_dims(anchor.dim(), data.dim(), "proximal_least_squares");
  if (!(eta > 0.0)) throw ConfigError("proximal_least_squares: eta must be positive");
  if (data.empty()) throw DimensionError("proximal_least_squares: empty dataset");
  const double scale = 2.0 * eta / static_cast<double>(data.size());
  Matrix normal = scale * (data.features.transpose() * data.features);
  normal.diagonal().array() += 2.0;
  const Vector rhs = scale * (data.features.transpose() * data.labels) + 2.0 * anchor.weights;
  Eigen::LLT<Matrix> llt(normal);
  return LinearParams(llt.solve(rhs));
}

inline double predict(const LinearParams& params, const Eigen::Ref<const Vector>& x) {
  detail::require_dims(params.dim(), static_cast<std::size_t>(x.size()), "predict");
  return params.weights.dot(x);
}

inline Vector predict_rows(const LinearParams& params, const Matrix& rows) {
  detail::require_dims(params.dim(), static_cast<std::size_t>(rows.cols()), "predict");
  return rows * params.weights;
}

// Minimum-norm least-squares fit; exact interpolation when d > m.
inline LinearParams least_squares_fit(const LocalDataset& data) {
  if (data.empty()) throw DimensionError("least_squares_fit: empty dataset");
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(data.features);
  return LinearParams(cod.solve(data.labels));
}

// argmin_w sum_r weights_r (y_r - w^T x_r)^2, minimum-norm on rank deficiency.
inline LinearParams weighted_least_squares_fit(const Matrix& x, const Vector& y,
                                               const Vector& weights) {
  if (x.rows() != y.size() || y.size() != weights.size()) {
    throw DimensionError("weighted_least_squares_fit: row counts disagree");
  }
  if (x.rows() == 0) throw DimensionError("weighted_least_squares_fit: empty sample set");
  const Vector root = weights.array().sqrt();
  const Matrix xs = root.asDiagonal() * x;
  const Vector ys = root.cwiseProduct(y);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(xs);
  return LinearParams(cod.solve(ys));
}

// argmin_w L(w) + penalty ||w||^2.
inline LinearParams ridge_fit(const LocalDataset& data, double penalty) {
  if (data.empty()) throw DimensionError("ridge_fit: empty dataset");
  if (!(penalty > 0.0)) throw ConfigError("ridge_fit: penalty must be positive");
  const double inv_m = 1.0 / static_cast<double>(data.size());
  Matrix normal = inv_m * (data.features.transpose() * data.features);
  normal.diagonal().array() += penalty;
  Eigen::LLT<Matrix> llt(normal);
  return LinearParams(llt.solve(inv_m * (data.features.transpose() * data.labels)));
}

}  // namespace persfl
