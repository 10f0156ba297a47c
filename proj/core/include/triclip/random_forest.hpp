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

// Binary random forest: bootstrap-sampled Gini trees with a random feature
// subset per node.

#ifndef TRICLIP_RANDOM_FOREST_HPP_
#define TRICLIP_RANDOM_FOREST_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "triclip/model.hpp"

namespace triclip {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  int depth = 0;
  std::uint8_t label = 0;  // majority class of the node's samples

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::uint8_t predict(std::span<const double> x) const;
  int depth() const;
};

struct ForestOptions {
  int n_trees = 50;
  int max_depth = 7;
  int max_features = 0;  // 0: ceil(sqrt(F))
};

struct RandomForestModel {
  int n_features = 0;
  ForestOptions options;
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;
};

// X is N x F, y holds 0/1. Throws InvalidArgument when N < 2, shapes
// disagree, a label is not 0/1, or only one class is present.
RandomForestModel rf_fit(const Mat& X, std::span<const std::uint8_t> y,
                         std::uint64_t seed, const ForestOptions& options = {});

// Majority vote over trees; an even split goes to class 0.
std::vector<std::uint8_t> rf_predict(const RandomForestModel& model, const Mat& X);

}  // namespace triclip

#endif  // TRICLIP_RANDOM_FOREST_HPP_
