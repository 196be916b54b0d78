#pragma once

// Depth-limited CART regression tree with per-sample weights.
//
// Each split (feature, threshold) sends x[feature] < threshold left. The split
// at a node maximizes the reduction of weighted squared error
//   SSE = sum_i w_i (y_i - ybar_w)^2,   ybar_w = sum_i w_i y_i / sum_i w_i,
// over thresholds placed at midpoints of consecutive distinct feature values.
// Gains within 1e-12 * SSE of each other count as equal; equal gains resolve
// to the lowest feature index, then the lowest threshold.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "persfl/dataset.hpp"
#include "persfl/error.hpp"

namespace persfl {

struct WeightedSample {
  Vector features;
  double label = 0.0;
  double weight = 1.0;
};

struct TreeOptions {
  std::size_t max_depth = 3;
  std::size_t min_leaf = 1;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // weighted label mean of the samples reaching the node
  double weight = 0.0;
  std::size_t count = 0;
  std::size_t depth = 0;

  bool is_leaf() const noexcept { return feature < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  bool empty() const noexcept { return nodes_.empty(); }

  template <typename Vec>
  double predict(const Vec& x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(x[n.feature] < n.threshold ? n.left : n.right);
    }
    return nodes_[i].value;
  }

  Vector predict_rows(const Matrix& rows) const {
    Vector out(rows.rows());
    for (Eigen::Index r = 0; r < rows.rows(); ++r) out(r) = predict(rows.row(r));
    return out;
  }

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.depth);
    return d;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  // Same split structure (features, thresholds, shape); leaf values ignored.
  bool same_structure(const RegressionTree& other) const {
    if (nodes_.size() != other.nodes_.size()) return false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& a = nodes_[i];
      const auto& b = other.nodes_[i];
      if (a.feature != b.feature || a.left != b.left || a.right != b.right) return false;
      if (!a.is_leaf() && a.threshold != b.threshold) return false;
    }
    return true;
  }

  // Indented text dump, one node per line.
  std::string to_text() const {
    std::string out;
    if (!nodes_.empty()) append_text(0, out);
    return out;
  }

 private:
  void append_text(std::size_t i, std::string& out) const {
    const auto& n = nodes_[i];
    char buf[160];
    if (n.is_leaf()) {
      std::snprintf(buf, sizeof buf, "leaf value=%.12g n=%zu weight=%.12g", n.value, n.count,
                    n.weight);
    } else {
      std::snprintf(buf, sizeof buf, "x%d < %.12g  (n=%zu weight=%.12g value=%.12g)", n.feature,
                    n.threshold, n.count, n.weight, n.value);
    }
    out.append(2 * n.depth, ' ');
    out += buf;
    out += '\n';
    if (!n.is_leaf()) {
      append_text(static_cast<std::size_t>(n.left), out);
      append_text(static_cast<std::size_t>(n.right), out);
    }
  }

  std::vector<TreeNode> nodes_;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const Vector& y, const Vector& w, const TreeOptions& opt)
      : x_(x), y_(y), w_(w), opt_(opt), order_(static_cast<std::size_t>(x.cols())) {
    const auto n = static_cast<std::uint32_t>(x.rows());
    for (std::size_t j = 0; j < order_.size(); ++j) {
      auto& idx = order_[j];
      idx.resize(n);
      std::iota(idx.begin(), idx.end(), 0u);
      const auto col = static_cast<Eigen::Index>(j);
      std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        return x_(a, col) < x_(b, col);
      });
    }
    scratch_.resize(n);
    goes_left_.resize(n);
  }

  RegressionTree build() {
    grow(0, static_cast<std::size_t>(x_.rows()), 0);
    return RegressionTree(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(std::size_t begin, std::size_t end, std::size_t depth) {
    const auto& rows = order_[0];
    double total_w = 0.0, total_wy = 0.0;
    for (std::size_t p = begin; p < end; ++p) {
      total_w += w_(rows[p]);
      total_wy += w_(rows[p]) * y_(rows[p]);
    }
    const double mean = total_wy / total_w;
    double sse = 0.0, energy = 0.0;
    for (std::size_t p = begin; p < end; ++p) {
      const double r = y_(rows[p]) - mean;
      sse += w_(rows[p]) * r * r;
      energy += w_(rows[p]) * y_(rows[p]) * y_(rows[p]);
    }

    const int id = static_cast<int>(nodes_.size());
    TreeNode node;
    node.value = mean;
    node.weight = total_w;
    node.count = end - begin;
    node.depth = depth;
    nodes_.push_back(node);

    const std::size_t count = end - begin;
    const bool pure = sse <= 1e-24 * energy;
    if (depth >= opt_.max_depth || count < 2 * opt_.min_leaf || pure) return id;

    const Split best = find_split(begin, end, mean, sse);
    if (best.feature < 0) return id;

    const std::size_t mid = partition(begin, end, best);
    nodes_[id].feature = best.feature;
    nodes_[id].threshold = best.threshold;
    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  Split find_split(std::size_t begin, std::size_t end, double mean, double sse) const {
    // Centered labels keep the running sums well conditioned.
    double tw = 0.0, t1 = 0.0, t2 = 0.0;
    for (std::size_t p = begin; p < end; ++p) {
      const auto i = order_[0][p];
      const double r = y_(i) - mean;
      tw += w_(i);
      t1 += w_(i) * r;
      t2 += w_(i) * r * r;
    }
    Split best;
    const double min_gain = 1e-12 * sse;
    const std::size_t count = end - begin;
    for (std::size_t j = 0; j < order_.size(); ++j) {
      const auto& idx = order_[j];
      const auto col = static_cast<Eigen::Index>(j);
      double lw = 0.0, l1 = 0.0, l2 = 0.0;
      for (std::size_t p = begin; p + 1 < end; ++p) {
        const auto i = idx[p];
        const double r = y_(i) - mean;
        lw += w_(i);
        l1 += w_(i) * r;
        l2 += w_(i) * r * r;
        const std::size_t left_n = p + 1 - begin;
        const double lo = x_(i, col);
        const double hi = x_(idx[p + 1], col);
        if (!(lo < hi)) continue;
        if (left_n < opt_.min_leaf || count - left_n < opt_.min_leaf) continue;
        const double rw = tw - lw, r1 = t1 - l1, r2 = t2 - l2;
        const double child_sse = (l2 - l1 * l1 / lw) + (r2 - r1 * r1 / rw);
        const double gain = sse - child_sse;
        if (gain > min_gain && gain > best.gain + min_gain) {
          double thr = 0.5 * (lo + hi);
          if (!(thr < hi)) thr = lo;
          best = Split{static_cast<int>(j), thr, gain};
        }
      }
    }
    return best;
  }

  std::size_t partition(std::size_t begin, std::size_t end, const Split& s) {
    const auto col = static_cast<Eigen::Index>(s.feature);
    for (std::size_t p = begin; p < end; ++p) {
      const auto i = order_[0][p];
      goes_left_[i] = x_(i, col) < s.threshold;
    }
    std::size_t mid = begin;
    for (auto& idx : order_) {
      std::size_t l = begin, r = 0;
      for (std::size_t p = begin; p < end; ++p) {
        const auto i = idx[p];
        if (goes_left_[i]) {
          idx[l++] = i;
        } else {
          scratch_[r++] = i;
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r),
                idx.begin() + static_cast<std::ptrdiff_t>(l));
      mid = l;
    }
    return mid;
  }

  const Matrix& x_;
  const Vector& y_;
  const Vector& w_;
  TreeOptions opt_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<std::uint32_t> scratch_;
  std::vector<char> goes_left_;
  std::vector<TreeNode> nodes_;
};

}  // namespace detail

inline RegressionTree fit_tree(const Matrix& x, const Vector& y, const Vector& weights,
                               const TreeOptions& opt = {}) {
  if (x.rows() == 0) throw ConfigError("fit_tree: empty sample set");
  if (x.rows() != y.size() || y.size() != weights.size()) {
    throw DimensionError("fit_tree: feature, label and weight counts disagree");
  }
  if (opt.min_leaf == 0) throw ConfigError("fit_tree: min_leaf must be at least 1");
  if (!(weights.array() > 0.0).all()) throw ConfigError("fit_tree: weights must be positive");
  return detail::TreeBuilder(x, y, weights, opt).build();
}

inline RegressionTree fit_tree(const LocalDataset& data, const TreeOptions& opt = {}) {
  return fit_tree(data.features, data.labels, Vector::Ones(data.labels.size()), opt);
}

inline RegressionTree fit_tree(const std::vector<WeightedSample>& samples, std::size_t max_depth,
                               std::size_t min_leaf = 1) {
  if (samples.empty()) throw ConfigError("fit_tree: empty sample set");
  const auto d = samples.front().features.size();
  Matrix x(static_cast<Eigen::Index>(samples.size()), d);
  Vector y(x.rows()), w(x.rows());
  for (std::size_t r = 0; r < samples.size(); ++r) {
    if (samples[r].features.size() != d) throw DimensionError("fit_tree: ragged feature vectors");
    x.row(static_cast<Eigen::Index>(r)) = samples[r].features.transpose();
    y(static_cast<Eigen::Index>(r)) = samples[r].label;
    w(static_cast<Eigen::Index>(r)) = samples[r].weight;
  }
  return fit_tree(x, y, w, TreeOptions{max_depth, min_leaf});
}

template <typename Vec>
double predict_tree(const RegressionTree& tree, const Vec& x) {
  return tree.predict(x);
}

}  // namespace persfl
