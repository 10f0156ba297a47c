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

// 2-D projection of embeddings: PCA pre-reduction, exact t-SNE, SVG
// scatter plots and a Moran's I test of label clustering.

#ifndef TRICLIP_VIZ_HPP_
#define TRICLIP_VIZ_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triclip/datastore.hpp"
#include "triclip/model.hpp"
#include "triclip/probe.hpp"

namespace triclip {

struct PcaResult {
  Mat projected;   // N x k
  Mat components;  // k x D, orthonormal rows
  Vec mean;        // D
  Vec variances;   // k, descending
};

// Top-k principal components of the mean-centred rows. Each component is
// signed so that its largest-magnitude loading is positive. Throws
// InvalidArgument unless 1 <= k <= min(N, D).
PcaResult pca(const Mat& X, int k);
Mat pca_reduce(const Mat& X, int k);

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  int exaggeration_iterations = 250;
  double exaggeration = 12.0;
  double learning_rate = 0.0;  // 0: N / 12
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::uint64_t seed = 0;
  int threads = 0;
};

inline constexpr int kMaxTsnePoints = 5000;

struct ConditionalAffinities {
  Mat p;        // N x N, rows sum to one, zero diagonal
  Vec beta;     // per-row precision 1 / (2 sigma^2)
  Vec entropy;  // per-row Shannon entropy in nats
};

// Per-row Gaussian kernels with precisions bisected until the row entropy
// is within `tolerance` of log(perplexity).
ConditionalAffinities conditional_affinities(const Mat& X, double perplexity,
                                             double tolerance = 1e-5, int threads = 0);

struct KlSample {
  int iteration = 0;
  double kl = 0.0;
};

struct TsneResult {
  Mat y;  // N x 2
  double kl_after_exaggeration = 0.0;
  double final_kl = 0.0;
  std::vector<KlSample> trace;
};

// Exact O(N^2) t-SNE. Throws InvalidArgument when N < 3 * perplexity or
// N > kMaxTsnePoints.
TsneResult tsne(const Mat& X, const TsneOptions& options = {});

struct Projection2D {
  std::vector<ChipId> chip_ids;
  std::vector<std::array<double, 2>> points;
  std::string modality;
  double perplexity = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  int pca_dims = 0;
  std::size_t source_points = 0;  // before subsampling
  double kl_after_exaggeration = 0.0;
  double final_kl = 0.0;
};

nlohmann::json to_json(const Projection2D& proj);
Projection2D projection_from_json(const nlohmann::json& j);
void save_projection(const Projection2D& proj, const std::filesystem::path& path);
Projection2D load_projection(const std::filesystem::path& path);

struct ProjectOptions {
  int pca_dims = 50;
  int max_points = kMaxTsnePoints;
  TsneOptions tsne;
};

// Projects every chip holding the requested modality (all three for
// modsconcat). Above max_points a uniform random subset is kept.
Projection2D project_embeddings(const EmbeddingSet& embeddings, ProbeModality modality,
                                const ProjectOptions& options = {});

// Colour index in [0, 1] for each value: log1p-scaled when log_scale, then
// min-max normalised. Constant input maps everything to 0.
std::vector<double> color_positions(std::span<const double> values, bool log_scale);

// One <circle> per point plus a colour bar drawn from <rect> elements.
std::string render_scatter_svg(const Projection2D& proj, std::span<const double> values,
                               bool log_scale, const std::string& title = {});
std::filesystem::path emit_scatter(const Projection2D& proj, std::span<const double> values,
                                   bool log_scale, const std::filesystem::path& out,
                                   const std::string& title = {});

// k nearest neighbours of each row (Euclidean, index order breaks ties).
std::vector<std::vector<int>> knn_graph(const Mat& points, int k);

// Moran's I with binary neighbour weights.
double morans_i(const std::vector<std::vector<int>>& neighbors, std::span<const double> values);

struct MoranTest {
  double statistic = 0.0;
  double expected = 0.0;  // -1 / (N - 1)
  double p_value = 1.0;   // one-sided, (1 + #perm >= observed) / (1 + permutations)
  int permutations = 0;
};

MoranTest moran_permutation_test(const Mat& points, std::span<const double> values,
                                 int k = 10, int permutations = 999, std::uint64_t seed = 0);

}  // namespace triclip

#endif  // TRICLIP_VIZ_HPP_
