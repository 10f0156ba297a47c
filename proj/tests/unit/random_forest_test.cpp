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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "triclip/errors.hpp"
#include "triclip/random_forest.hpp"
#include "triclip/rng.hpp"

namespace triclip {
namespace {

struct Dataset {
  Mat x;
  std::vector<std::uint8_t> y;
};

Dataset xor_data(int n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d{Mat(n, 2), std::vector<std::uint8_t>(n)};
  for (int i = 0; i < n; ++i) {
    d.x(i, 0) = 2 * rng.uniform() - 1;
    d.x(i, 1) = 2 * rng.uniform() - 1;
    d.y[i] = (d.x(i, 0) > 0) != (d.x(i, 1) > 0);
  }
  return d;
}

double accuracy(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& y) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += p[i] == y[i];
  return static_cast<double>(ok) / y.size();
}

// Independent tree walk and vote count.
std::uint8_t recount(const RandomForestModel& model, const Mat& x, Eigen::Index row) {
  int ones = 0;
  for (const DecisionTree& tree : model.trees) {
    int node = 0;
    while (tree.nodes[node].feature >= 0) {
      const TreeNode& n = tree.nodes[node];
      node = x(row, n.feature) <= n.threshold ? n.left : n.right;
    }
    ones += tree.nodes[node].label;
  }
  return 2 * ones > static_cast<int>(model.trees.size()) ? 1 : 0;
}

// Exhaustive depth-2 axis-aligned tree, minimising training errors.
double best_depth2_accuracy(const Dataset& d) {
  const auto n = d.x.rows();
  auto errors_of_leafs = [&](const std::vector<int>& idx) {
    int ones = 0;
    for (int i : idx) ones += d.y[i];
    return std::min<int>(ones, static_cast<int>(idx.size()) - ones);
  };
  auto best_split = [&](const std::vector<int>& idx) {
    int best = errors_of_leafs(idx);
    for (int f = 0; f < d.x.cols(); ++f) {
      for (int t : idx) {
        std::vector<int> l, r;
        for (int i : idx) (d.x(i, f) <= d.x(t, f) ? l : r).push_back(i);
        best = std::min(best, errors_of_leafs(l) + errors_of_leafs(r));
      }
    }
    return best;
  };
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  int best = best_split(all);
  for (int f = 0; f < d.x.cols(); ++f) {
    for (Eigen::Index t = 0; t < n; ++t) {
      std::vector<int> l, r;
      for (int i : all) (d.x(i, f) <= d.x(t, f) ? l : r).push_back(i);
      best = std::min(best, best_split(l) + best_split(r));
    }
  }
  return 1.0 - static_cast<double>(best) / n;
}

TEST(RandomForest, StructureMatchesOptions) {
  Dataset d = xor_data(300, 1);
  RandomForestModel m = rf_fit(d.x, d.y, 4);
  EXPECT_EQ(m.trees.size(), 50u);
  EXPECT_EQ(m.n_features, 2);
  for (const DecisionTree& t : m.trees) {
    EXPECT_LE(t.depth(), 7);
    for (const TreeNode& n : t.nodes) {
      EXPECT_LE(n.depth, 7);
      if (!n.is_leaf()) {
        EXPECT_GT(n.left, 0);
        EXPECT_GT(n.right, 0);
      }
    }
  }
}

TEST(RandomForest, SeparableOneDimensional) {
  Rng rng(3);
  Dataset d{Mat(200, 1), std::vector<std::uint8_t>(200)};
  for (int i = 0; i < 200; ++i) {
    d.x(i, 0) = rng.uniform() * 2 - 1;
    d.y[i] = d.x(i, 0) > 0;
  }
  RandomForestModel m = rf_fit(d.x, d.y, 8);
  EXPECT_GE(accuracy(rf_predict(m, d.x), d.y), 0.99);
}

TEST(RandomForest, XorBeatsDepthTwoOracleLevel) {
  Dataset d = xor_data(400, 2);
  const double oracle = best_depth2_accuracy(d);
  EXPECT_GE(oracle, 0.9);
  RandomForestModel m = rf_fit(d.x, d.y, 9);
  EXPECT_GE(accuracy(rf_predict(m, d.x), d.y), 0.9);
  Dataset held_out = xor_data(400, 3);
  EXPECT_GE(accuracy(rf_predict(m, held_out.x), held_out.y), 0.9);
}

TEST(RandomForest, PredictEqualsIndependentVoteCount) {
  Dataset d = xor_data(200, 5);
  Rng rng(6);
  Mat probe(100, 2);
  for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = 2 * rng.uniform() - 1;
  for (int n_trees : {50, 4}) {
    ForestOptions opt;
    opt.n_trees = n_trees;
    RandomForestModel m = rf_fit(d.x, d.y, 10, opt);
    auto pred = rf_predict(m, probe);
    for (Eigen::Index i = 0; i < probe.rows(); ++i) EXPECT_EQ(pred[i], recount(m, probe, i));
  }
}

TEST(RandomForest, EvenVoteGoesToZero) {
  RandomForestModel m;
  m.n_features = 1;
  DecisionTree zero, one;
  zero.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0, 0});
  one.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0, 1});
  m.trees = {zero, one};
  Mat x = Mat::Zero(1, 1);
  EXPECT_EQ(rf_predict(m, x)[0], 0);
  m.trees.push_back(one);
  EXPECT_EQ(rf_predict(m, x)[0], 1);
}

TEST(RandomForest, FixedSeedIsBitwiseDeterministic) {
  Dataset d = xor_data(150, 7);
  Dataset probe = xor_data(100, 8);
  RandomForestModel a = rf_fit(d.x, d.y, 42);
  RandomForestModel b = rf_fit(d.x, d.y, 42);
  EXPECT_EQ(rf_predict(a, probe.x), rf_predict(b, probe.x));
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size());
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
      EXPECT_EQ(a.trees[t].nodes[k].feature, b.trees[t].nodes[k].feature);
      EXPECT_EQ(a.trees[t].nodes[k].threshold, b.trees[t].nodes[k].threshold);
    }
  }
}

TEST(RandomForest, MaxDepthRespected) {
  Dataset d = xor_data(500, 11);
  ForestOptions opt;
  opt.max_depth = 2;
  opt.n_trees = 10;
  RandomForestModel m = rf_fit(d.x, d.y, 1, opt);
  for (const DecisionTree& t : m.trees) EXPECT_LE(t.depth(), 2);
}

TEST(RandomForest, RejectsBadInput) {
  Mat x(4, 2);
  x.setZero();
  std::vector<std::uint8_t> one_class{1, 1, 1, 1};
  EXPECT_THROW(rf_fit(x, one_class, 1), InvalidArgument);
  std::vector<std::uint8_t> bad_label{0, 1, 2, 0};
  EXPECT_THROW(rf_fit(x, bad_label, 1), InvalidArgument);
  std::vector<std::uint8_t> short_y{0, 1};
  EXPECT_THROW(rf_fit(x, short_y, 1), InvalidArgument);
  Mat single(1, 2);
  single.setZero();
  std::vector<std::uint8_t> y1{0};
  EXPECT_THROW(rf_fit(single, y1, 1), InvalidArgument);
  RandomForestModel m = rf_fit(x, std::vector<std::uint8_t>{0, 1, 0, 1}, 1);
  EXPECT_THROW(rf_predict(m, Mat::Zero(2, 3)), InvalidArgument);
}

}  // namespace
}  // namespace triclip
