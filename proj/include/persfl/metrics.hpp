#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "persfl/error.hpp"
#include "persfl/hypothesis.hpp"

namespace persfl {

// Iteration-indexed metric values for one setting.
struct MetricTrace {
  std::string label;
  std::vector<std::pair<std::size_t, double>> values;

  void push(std::size_t round, double v) { values.emplace_back(round, v); }

  std::size_t size() const noexcept { return values.size(); }
  double back() const { return values.back().second; }
  double at_round(std::size_t k) const {
    for (const auto& [r, v] : values) {
      if (r == k) return v;
    }
    throw std::out_of_range("trace '" + label + "' has no round " + std::to_string(k));
  }

  // First round whose value is <= threshold, or nullopt.
  std::optional<std::size_t> first_round_at_or_below(double threshold) const {
    for (const auto& [r, v] : values) {
      if (v <= threshold) return r;
    }
    return std::nullopt;
  }

  void validate() const {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i].second)) {
        throw UndefinedError("trace '" + label + "' has a non-finite value at round " +
                             std::to_string(values[i].first));
      }
      if (i > 0 && values[i].first <= values[i - 1].first) {
        throw UndefinedError("trace '" + label + "' rounds are not strictly increasing");
      }
    }
  }
};

inline MetricTrace make_trace(std::string label, const std::vector<double>& per_round) {
  MetricTrace t{std::move(label), {}};
  t.values.reserve(per_round.size());
  for (std::size_t k = 0; k < per_round.size(); ++k) t.push(k, per_round[k]);
  return t;
}

// Pointwise mean of traces sharing the same rounds.
inline MetricTrace average_traces(const std::vector<MetricTrace>& traces, std::string label) {
  if (traces.empty()) throw ConfigError("average_traces: no traces");
  MetricTrace out{std::move(label), traces.front().values};
  for (std::size_t t = 1; t < traces.size(); ++t) {
    if (traces[t].values.size() != out.values.size()) {
      throw DimensionError("average_traces: traces differ in length");
    }
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      if (traces[t].values[i].first != out.values[i].first) {
        throw DimensionError("average_traces: traces differ in rounds");
      }
      out.values[i].second += traces[t].values[i].second;
    }
  }
  const double n = static_cast<double>(traces.size());
  for (auto& v : out.values) v.second /= n;
  return out;
}

// ||estimate - truth||^2
inline double param_mse(const LinearParams& estimate, const LinearParams& truth) {
  if (estimate.dim() != truth.dim()) throw DimensionError("param_mse: dimension mismatch");
  return (estimate.weights - truth.weights).squaredNorm();
}

inline double param_mse(const LinearParams& estimate, const Vector& truth) {
  return param_mse(estimate, LinearParams(truth));
}

// Sum (not mean) of squared errors over the validation set.
inline double validation_mse(const Hypothesis& h, const LocalDataset& val) {
  return (predict_rows(h, val.features) - val.labels).squaredNorm();
}

inline double normalized_mse(double mse, double oracle_mse) {
  if (!(oracle_mse > 0.0)) {
    throw UndefinedError("normalized_mse: oracle validation MSE is zero");
  }
  return mse / oracle_mse;
}

inline double normalized_mse(const Hypothesis& h, const Hypothesis& oracle_h,
                             const LocalDataset& val) {
  return normalized_mse(validation_mse(h, val), validation_mse(oracle_h, val));
}

}  // namespace persfl
