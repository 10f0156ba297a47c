// Copyright 2026 The TriCLIP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "triclip/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "triclip/errors.hpp"
#include "triclip/rng.hpp"

namespace triclip {
namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

// n * gini for a two-class count pair.
double weighted_gini(double n0, double n1) {
  const double n = n0 + n1;
  if (n == 0.0) return 0.0;
  return n - (n0 * n0 + n1 * n1) / n;
}

class TreeBuilder {
 public:
  TreeBuilder(const Mat& X, std::span<const std::uint8_t> y, int max_depth,
              int max_features, Rng& rng)
      : X_(X), y_(y), max_depth_(max_depth), max_features_(max_features), rng_(rng) {
    features_.resize(static_cast<std::size_t>(X.cols()));
  }

  DecisionTree build(std::vector<int> samples) {
    tree_.nodes.clear();
    grow(std::move(samples), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<int> samples, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::size_t ones = 0;
    for (int s : samples) ones += y_[s];
    const std::size_t zeros = samples.size() - ones;
    {
      TreeNode& node = tree_.nodes[id];
      node.depth = depth;
      node.label = ones > zeros ? 1 : 0;
    }
    if (ones == 0 || zeros == 0 || samples.size() < 2 || depth >= max_depth_) return id;

    const Split split = best_split(samples);
    if (split.feature < 0) return id;

    std::vector<int> left, right;
    for (int s : samples) {
      (X_(s, split.feature) <= split.threshold ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = tree_.nodes[id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  Split best_split(const std::vector<int>& samples) {
    // Partial Fisher-Yates draw of max_features distinct features.
    std::iota(features_.begin(), features_.end(), 0);
    const int f_total = static_cast<int>(features_.size());
    const int draw = std::min(max_features_, f_total);
    for (int i = 0; i < draw; ++i) {
      const int j = i + static_cast<int>(rng_.below(static_cast<std::uint64_t>(f_total - i)));
      std::swap(features_[i], features_[j]);
    }

    Split best;
    double total1 = 0.0;
    for (int s : samples) total1 += y_[s];
    const double total0 = static_cast<double>(samples.size()) - total1;
    column_.resize(samples.size());
    for (int fi = 0; fi < draw; ++fi) {
      const int f = features_[fi];
      for (std::size_t i = 0; i < samples.size(); ++i) {
        column_[i] = {X_(samples[i], f), y_[samples[i]]};
      }
      std::sort(column_.begin(), column_.end());
      double l0 = 0.0, l1 = 0.0;
      for (std::size_t i = 0; i + 1 < column_.size(); ++i) {
        (column_[i].second ? l1 : l0) += 1.0;
        if (column_[i].first == column_[i + 1].first) continue;
        const double impurity =
            weighted_gini(l0, l1) + weighted_gini(total0 - l0, total1 - l1);
        if (impurity < best.impurity) {
          best.feature = f;
          best.threshold = 0.5 * (column_[i].first + column_[i + 1].first);
          // Midpoints of adjacent floats can round up to the right value.
          if (!(best.threshold < column_[i + 1].first)) best.threshold = column_[i].first;
          best.impurity = impurity;
        }
      }
    }
    return best;
  }

  const Mat& X_;
  std::span<const std::uint8_t> y_;
  int max_depth_;
  int max_features_;
  Rng& rng_;
  std::vector<int> features_;
  std::vector<std::pair<double, std::uint8_t>> column_;
  DecisionTree tree_;
};

}  // namespace

std::uint8_t DecisionTree::predict(std::span<const double> x) const {
  int i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[i].label;
}

int DecisionTree::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

RandomForestModel rf_fit(const Mat& X, std::span<const std::uint8_t> y,
                         std::uint64_t seed, const ForestOptions& options) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < 2) throw InvalidArgument("random forest needs at least two samples");
  if (y.size() != n) {
    throw InvalidArgument("feature rows (" + std::to_string(n) + ") and labels (" +
                          std::to_string(y.size()) + ") differ");
  }
  if (X.cols() < 1) throw InvalidArgument("random forest needs at least one feature");
  if (options.n_trees < 1 || options.max_depth < 0) {
    throw InvalidArgument("n_trees must be positive and max_depth non-negative");
  }
  std::size_t ones = 0;
  for (auto v : y) {
    if (v > 1) throw InvalidArgument("labels must be 0 or 1");
    ones += v;
  }
  if (ones == 0 || ones == n) throw InvalidArgument("random forest needs both classes");

  RandomForestModel model;
  model.n_features = static_cast<int>(X.cols());
  model.options = options;
  model.seed = seed;
  const int max_features =
      options.max_features > 0
          ? options.max_features
          : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(X.cols()))));

  model.trees.reserve(options.n_trees);
  for (int t = 0; t < options.n_trees; ++t) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    std::vector<int> bootstrap(n);
    for (auto& b : bootstrap) b = static_cast<int>(rng.below(n));
    TreeBuilder builder(X, y, options.max_depth, max_features, rng);
    model.trees.push_back(builder.build(std::move(bootstrap)));
  }
  return model;
}

std::vector<std::uint8_t> rf_predict(const RandomForestModel& model, const Mat& X) {
  if (X.cols() != model.n_features) {
    throw InvalidArgument("expected " + std::to_string(model.n_features) +
                          " features, got " + std::to_string(X.cols()));
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    std::span<const double> x(X.row(r).data(), static_cast<std::size_t>(X.cols()));
    std::size_t votes = 0;
    for (const auto& tree : model.trees) votes += tree.predict(x);
    out[r] = 2 * votes > model.trees.size() ? 1 : 0;
  }
  return out;
}

}  // namespace triclip
