#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>

#include "persfl/error.hpp"

namespace persfl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// One device's labeled samples: row r of `features` pairs with labels(r).
struct LocalDataset {
  Matrix features;
  Vector labels;

  LocalDataset() = default;
  LocalDataset(Matrix x, Vector y) : features(std::move(x)), labels(std::move(y)) {
    if (features.rows() != labels.size()) {
      throw DimensionError("dataset has " + std::to_string(features.rows()) +
                           " feature rows but " + std::to_string(labels.size()) + " labels");
    }
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(labels.size()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
  bool empty() const noexcept { return labels.size() == 0; }
};

}  // namespace persfl
