#pragma once

// Reference computations used only for testing. Each one takes a different
// route from the production code it checks: explicit loops instead of
// Eigen products, iterative minimization instead of factorizations, full
// enumeration instead of sorted sweeps.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "persfl/dataset.hpp"
#include "persfl/regtree.hpp"

namespace persfl::verify {

// (1/m) sum_r (y_r - w^T x_r)^2 by explicit loops.
inline double loop_squared_loss(const Vector& w, const LocalDataset& data) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    double pred = 0.0;
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) pred += w(j) * data.features(r, j);
    s += (data.labels(r) - pred) * (data.labels(r) - pred);
  }
  return s / static_cast<double>(data.labels.size());
}

inline Vector central_difference_gradient(const std::function<double(const Vector&)>& f,
                                          const Vector& at, double step) {
  Vector g(at.size());
  for (Eigen::Index j = 0; j < at.size(); ++j) {
    Vector hi = at, lo = at;
    hi(j) += step;
    lo(j) -= step;
    g(j) = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

// eta * L(w) + ||w - anchor||^2
inline double proximal_objective(const Vector& w, const Vector& anchor, const LocalDataset& data,
                                 double eta) {
  double dev = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) dev += (w(j) - anchor(j)) * (w(j) - anchor(j));
  return eta * loop_squared_loss(w, data) + dev;
}

// Minimizes the proximal objective by gradient descent with loop-evaluated
// gradients and a step from a Gershgorin bound on the Hessian.
inline Vector gradient_descent_proximal(const Vector& anchor, const LocalDataset& data, double eta,
                                        double tol = 1e-13, std::size_t max_iter = 2'000'000) {
  const auto m = static_cast<double>(data.labels.size());
  const Eigen::Index d = anchor.size();
  // Hessian H = (2 eta/m) X^T X + 2 I; bound its largest eigenvalue.
  double bound = 0.0;
  for (Eigen::Index a = 0; a < d; ++a) {
    double row = 2.0;
    for (Eigen::Index b = 0; b < d; ++b) {
      double xtx = 0.0;
      for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
        xtx += data.features(r, a) * data.features(r, b);
      }
      row += std::abs(2.0 * eta / m * xtx);
    }
    bound = std::max(bound, row);
  }
  const double step = 1.0 / bound;
  Vector w = anchor;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector g = 2.0 * (w - anchor);
    for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
      double pred = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) pred += w(j) * data.features(r, j);
      const double resid = data.labels(r) - pred;
      for (Eigen::Index j = 0; j < d; ++j) g(j) += -2.0 * eta / m * data.features(r, j) * resid;
    }
    if (g.lpNorm<Eigen::Infinity>() < tol) break;
    w -= step * g;
  }
  return w;
}

struct EnumeratedSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

inline double direct_weighted_sse(const std::vector<std::size_t>& idx, const Vector& y,
                                  const Vector& w) {
  double sw = 0.0, swy = 0.0;
  for (auto i : idx) {
    sw += w(i);
    swy += w(i) * y(i);
  }
  const double mean = swy / sw;
  double s = 0.0;
  for (auto i : idx) s += w(i) * (y(i) - mean) * (y(i) - mean);
  return s;
}

// Best split of the samples `idx` over every (feature, midpoint) pair,
// evaluating both children directly. Gains within 1e-12 * SSE are ties and
// keep the first in (feature, threshold) ascending order.
inline EnumeratedSplit enumerate_best_split(const Matrix& x, const Vector& y, const Vector& w,
                                            const std::vector<std::size_t>& idx,
                                            std::size_t min_leaf) {
  EnumeratedSplit best;
  const double parent = direct_weighted_sse(idx, y, w);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<double> vals;
    for (auto i : idx) vals.push_back(x(i, j));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t t = 0; t + 1 < vals.size(); ++t) {
      double thr = 0.5 * (vals[t] + vals[t + 1]);
      if (!(thr < vals[t + 1])) thr = vals[t];
      std::vector<std::size_t> left, right;
      for (auto i : idx) (x(i, j) < thr ? left : right).push_back(i);
      if (left.size() < min_leaf || right.size() < min_leaf) continue;
      const double gain =
          parent - direct_weighted_sse(left, y, w) - direct_weighted_sse(right, y, w);
      if (gain > 1e-12 * parent && gain > best.gain + 1e-12 * parent) {
        best = EnumeratedSplit{static_cast<int>(j), thr, gain};
      }
    }
  }
  return best;
}

struct TreeCheck {
  std::size_t nodes_checked = 0;
  std::size_t mismatches = 0;
  std::string first_problem;
};

// Walks a fitted tree and re-derives every decision by enumeration: internal
// nodes must carry the enumerated best split, leaves above the depth limit
// must have no improving split, and every node value must be the weighted
// label mean of the samples reaching it.
inline TreeCheck check_tree_by_enumeration(const RegressionTree& tree, const Matrix& x,
                                           const Vector& y, const Vector& w,
                                           const TreeOptions& opt) {
  TreeCheck out;
  auto fail = [&](const std::string& msg) {
    ++out.mismatches;
    if (out.first_problem.empty()) out.first_problem = msg;
  };
  std::function<void(std::size_t, const std::vector<std::size_t>&, std::size_t)> walk =
      [&](std::size_t node, const std::vector<std::size_t>& idx, std::size_t depth) {
        ++out.nodes_checked;
        const auto& n = tree.nodes()[node];
        double sw = 0.0, swy = 0.0;
        for (auto i : idx) {
          sw += w(i);
          swy += w(i) * y(i);
        }
        if (std::abs(n.value - swy / sw) > 1e-9 * (1.0 + std::abs(swy / sw))) {
          fail("node value is not the weighted mean");
        }
        const bool can_split = depth < opt.max_depth && idx.size() >= 2 * opt.min_leaf &&
                               direct_weighted_sse(idx, y, w) > 0.0;
        const EnumeratedSplit best = can_split ? enumerate_best_split(x, y, w, idx, opt.min_leaf)
                                               : EnumeratedSplit{};
        if (n.is_leaf()) {
          if (best.feature >= 0) {
            fail("leaf at depth " + std::to_string(depth) + " has an improving split");
          }
          return;
        }
        if (best.feature != n.feature || best.threshold != n.threshold) {
          fail("split mismatch at depth " + std::to_string(depth) + ": tree x" +
               std::to_string(n.feature) + "<" + std::to_string(n.threshold) + ", enumeration x" +
               std::to_string(best.feature) + "<" + std::to_string(best.threshold));
          return;
        }
        std::vector<std::size_t> left, right;
        for (auto i : idx) (x(i, n.feature) < n.threshold ? left : right).push_back(i);
        walk(static_cast<std::size_t>(n.left), left, depth + 1);
        walk(static_cast<std::size_t>(n.right), right, depth + 1);
      };
  std::vector<std::size_t> all(static_cast<std::size_t>(x.rows()));
  std::iota(all.begin(), all.end(), std::size_t{0});
  walk(0, all, 0);
  return out;
}

}  // namespace persfl::verify
