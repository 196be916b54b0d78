#pragma once

#include <variant>

#include "persfl/linmodel.hpp"
#include "persfl/regtree.hpp"

namespace persfl {

// A learnt predictor: either a linear model or a regression tree.
using Hypothesis = std::variant<LinearParams, RegressionTree>;

inline double predict(const Hypothesis& h, const Eigen::Ref<const Vector>& x) {
  return std::visit(
      [&](const auto& model) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(model)>, LinearParams>) {
          return predict(model, x);
        } else {
          return model.predict(x);
        }
      },
      h);
}

inline Vector predict_rows(const Hypothesis& h, const Matrix& rows) {
  return std::visit(
      [&](const auto& model) -> Vector {
        if constexpr (std::is_same_v<std::decay_t<decltype(model)>, LinearParams>) {
          return predict_rows(model, rows);
        } else {
          return model.predict_rows(rows);
        }
      },
      h);
}

// Mean squared prediction error (1/m) sum (y - h(x))^2 on a labeled set.
inline double empirical_loss(const Hypothesis& h, const LocalDataset& data) {
  if (data.empty()) throw DimensionError("empirical_loss: empty dataset");
  return (data.labels - predict_rows(h, data.features)).squaredNorm() /
         static_cast<double>(data.size());
}

}  // namespace persfl
