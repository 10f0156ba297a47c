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

#include "triclip/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "triclip/errors.hpp"
#include "triclip/json_io.hpp"
#include "triclip/parallel.hpp"
#include "triclip/rng.hpp"

namespace triclip {

PcaResult pca(const Mat& X, int k) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (k < 1 || k > std::min(n, d)) {
    throw InvalidArgument("pca: k=" + std::to_string(k) + " outside [1, min(N, D)] = [1, " +
                          std::to_string(std::min(n, d)) + "]");
  }
  PcaResult out;
  out.mean = X.colwise().mean().transpose();
  const Mat centred = X.rowwise() - out.mean.transpose();
  const Mat cov = (centred.transpose() * centred) / static_cast<double>(std::max<Eigen::Index>(1, n - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca: eigendecomposition failed");

  out.components.resize(k, d);
  out.variances.resize(k);
  for (int i = 0; i < k; ++i) {
    const Eigen::Index col = d - 1 - i;  // eigenvalues come ascending
    Vec v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components.row(i) = v.transpose();
    out.variances(i) = std::max(0.0, solver.eigenvalues()(col));
  }
  out.projected = centred * out.components.transpose();
  return out;
}

Mat pca_reduce(const Mat& X, int k) { return pca(X, k).projected; }

namespace {

Mat squared_distances(const Mat& X) {
  const Vec sq = X.rowwise().squaredNorm();
  Mat d = -2.0 * X * X.transpose();
  d.colwise() += sq;
  d.rowwise() += sq.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

}  // namespace

ConditionalAffinities conditional_affinities(const Mat& X, double perplexity,
                                             double tolerance, int threads) {
  const Eigen::Index n = X.rows();
  if (!(perplexity > 0.0) || n < 2 || perplexity > static_cast<double>(n - 1)) {
    throw InvalidArgument("perplexity " + std::to_string(perplexity) + " infeasible for N=" +
                          std::to_string(n));
  }
  const Mat d = squared_distances(X);
  const double target = std::log(perplexity);
  ConditionalAffinities out;
  out.p = Mat::Zero(n, n);
  out.beta.resize(n);
  out.entropy.resize(n);

  parallel_for(
      static_cast<std::size_t>(n),
      [&](std::size_t ui) {
        const auto i = static_cast<Eigen::Index>(ui);
        double dmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j != i) dmin = std::min(dmin, d(i, j));
        }
        std::vector<double> row(static_cast<std::size_t>(n));
        // Entropy of the row kernel at precision beta, distances shifted by
        // the row minimum for stability.
        auto evaluate = [&](double beta) {
          double z = 0.0, weighted = 0.0;
          for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) {
              row[j] = 0.0;
              continue;
            }
            const double shifted = d(i, j) - dmin;
            row[j] = std::exp(-beta * shifted);
            z += row[j];
            weighted += row[j] * shifted;
          }
          for (auto& v : row) v /= z;
          return std::log(z) + beta * weighted / z;
        };
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double h = evaluate(beta);
        for (int it = 0; it < 200 && std::abs(h - target) > tolerance; ++it) {
          if (h > target) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
          } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
          }
          h = evaluate(beta);
        }
        // Entropy recomputed directly from the normalised row.
        double entropy = 0.0;
        for (double v : row) {
          if (v > 0.0) entropy -= v * std::log(v);
        }
        for (Eigen::Index j = 0; j < n; ++j) out.p(i, j) = row[j];
        out.beta(i) = beta;
        out.entropy(i) = entropy;
      },
      threads);
  return out;
}

namespace {

double kl_divergence(const Mat& p, const Mat& num, double num_sum) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pij = p(i, j);
      if (i == j || pij <= 0.0) continue;
      const double qij = std::max(num(i, j) / num_sum, 1e-300);
      kl += pij * std::log(pij / qij);
    }
  }
  return kl;
}

}  // namespace

TsneResult tsne(const Mat& X, const TsneOptions& o) {
  const Eigen::Index n = X.rows();
  if (static_cast<double>(n) < 3.0 * o.perplexity) {
    throw InvalidArgument("t-SNE needs N >= 3 * perplexity (N=" + std::to_string(n) +
                          ", perplexity=" + std::to_string(o.perplexity) + ")");
  }
  if (n > kMaxTsnePoints) {
    throw InvalidArgument("exact t-SNE is capped at " + std::to_string(kMaxTsnePoints) +
                          " points; subsample first");
  }
  if (o.iterations < 1 || o.exaggeration_iterations < 0) {
    throw InvalidArgument("t-SNE iteration counts must be positive");
  }

  const ConditionalAffinities cond = conditional_affinities(X, o.perplexity, 1e-5, o.threads);
  Mat p = (cond.p + cond.p.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-300);
  p.diagonal().setZero();

  const double lr = o.learning_rate > 0.0 ? o.learning_rate : static_cast<double>(n) / 12.0;
  Rng rng(derive_seed(o.seed, {stream_tag("tsne-init")}));
  Mat y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i, 0) = 1e-4 * rng.normal();
    y(i, 1) = 1e-4 * rng.normal();
  }
  Mat update = Mat::Zero(n, 2);
  Mat gains = Mat::Ones(n, 2);
  Mat grad(n, 2);
  Mat num(n, n);
  std::vector<double> row_sums(static_cast<std::size_t>(n));

  TsneResult out;
  auto compute_num = [&] {
    parallel_for(
        static_cast<std::size_t>(n),
        [&](std::size_t ui) {
          const auto i = static_cast<Eigen::Index>(ui);
          double s = 0.0;
          for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) {
              num(i, j) = 0.0;
              continue;
            }
            const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
            num(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
            s += num(i, j);
          }
          row_sums[ui] = s;
        },
        o.threads);
    double total = 0.0;
    for (double s : row_sums) total += s;
    return total;
  };

  for (int it = 0; it < o.iterations; ++it) {
    const bool exaggerating = it < o.exaggeration_iterations;
    const double exag = exaggerating ? o.exaggeration : 1.0;
    const double momentum = it < o.exaggeration_iterations ? o.initial_momentum : o.final_momentum;
    const double num_sum = compute_num();
    parallel_for(
        static_cast<std::size_t>(n),
        [&](std::size_t ui) {
          const auto i = static_cast<Eigen::Index>(ui);
          double gx = 0.0, gy = 0.0;
          for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double w = (exag * p(i, j) - num(i, j) / num_sum) * num(i, j);
            gx += w * (y(i, 0) - y(j, 0));
            gy += w * (y(i, 1) - y(j, 1));
          }
          grad(i, 0) = 4.0 * gx;
          grad(i, 1) = 4.0 * gy;
        },
        o.threads);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0.0) == (update(i, c) > 0.0);
        gains(i, c) = same_sign ? std::max(0.01, gains(i, c) * 0.8) : gains(i, c) + 0.2;
        update(i, c) = momentum * update(i, c) - lr * gains(i, c) * grad(i, c);
        y(i, c) += update(i, c);
      }
    }
    y.rowwise() -= y.colwise().mean();
    if (!y.allFinite()) throw NumericError("t-SNE diverged at iteration " + std::to_string(it));

    const bool end_of_exaggeration = it + 1 == o.exaggeration_iterations;
    const bool last = it + 1 == o.iterations;
    if (end_of_exaggeration || last || (it + 1) % 50 == 0) {
      const double s = compute_num();
      const double kl = kl_divergence(p, num, s);
      out.trace.push_back({it + 1, kl});
      if (end_of_exaggeration) out.kl_after_exaggeration = kl;
      if (last) out.final_kl = kl;
    }
  }
  if (o.exaggeration_iterations >= o.iterations) out.kl_after_exaggeration = out.final_kl;
  out.y = std::move(y);
  return out;
}

nlohmann::json to_json(const Projection2D& proj) {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < proj.chip_ids.size(); ++i) {
    points.push_back({{"chip_id", proj.chip_ids[i]},
                      {"x", proj.points[i][0]},
                      {"y", proj.points[i][1]}});
  }
  return {{"method", "tsne"},
          {"modality", proj.modality},
          {"perplexity", proj.perplexity},
          {"iterations", proj.iterations},
          {"seed", proj.seed},
          {"pca_dims", proj.pca_dims},
          {"source_points", proj.source_points},
          {"kl_after_exaggeration", proj.kl_after_exaggeration},
          {"final_kl", proj.final_kl},
          {"points", points}};
}

Projection2D projection_from_json(const nlohmann::json& j) {
  Projection2D p;
  try {
    p.modality = j.at("modality").get<std::string>();
    p.perplexity = j.at("perplexity").get<double>();
    p.iterations = j.at("iterations").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.pca_dims = j.value("pca_dims", 0);
    p.source_points = j.value("source_points", std::size_t{0});
    p.kl_after_exaggeration = j.value("kl_after_exaggeration", 0.0);
    p.final_kl = j.at("final_kl").get<double>();
    for (const auto& pt : j.at("points")) {
      p.chip_ids.push_back(pt.at("chip_id").get<ChipId>());
      p.points.push_back({pt.at("x").get<double>(), pt.at("y").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed projection: ") + e.what());
  }
  for (const auto& pt : p.points) {
    if (!std::isfinite(pt[0]) || !std::isfinite(pt[1])) {
      throw FormatError("projection holds non-finite coordinates");
    }
  }
  return p;
}

void save_projection(const Projection2D& proj, const std::filesystem::path& path) {
  write_json_file(path, to_json(proj));
}

Projection2D load_projection(const std::filesystem::path& path) {
  return projection_from_json(read_json_file(path));
}

Projection2D project_embeddings(const EmbeddingSet& embeddings, ProbeModality modality,
                                const ProjectOptions& options) {
  std::vector<ChipId> ids;
  for (ChipId id : embeddings.chip_ids()) {
    bool ok = true;
    if (modality == ProbeModality::kModsconcat) {
      for (Modality m : kModalities) ok = ok && embeddings.has(id, m);
    } else {
      ok = embeddings.has(id, static_cast<Modality>(static_cast<int>(modality)));
    }
    if (ok) ids.push_back(id);
  }
  Projection2D proj;
  proj.source_points = ids.size();
  if (static_cast<int>(ids.size()) > options.max_points) {
    Rng rng(derive_seed(options.tsne.seed, {stream_tag("subsample")}));
    rng.shuffle(ids.begin(), ids.end());
    ids.resize(static_cast<std::size_t>(options.max_points));
    std::sort(ids.begin(), ids.end());
  }
  Mat X = probe_features(embeddings, ids, modality);
  const int dims = std::min<int>({options.pca_dims, static_cast<int>(X.rows()),
                                  static_cast<int>(X.cols())});
  if (dims >= 1 && dims < X.cols()) X = pca_reduce(X, dims);
  const TsneResult r = tsne(X, options.tsne);

  proj.chip_ids = ids;
  proj.modality = std::string(to_string(modality));
  proj.perplexity = options.tsne.perplexity;
  proj.iterations = options.tsne.iterations;
  proj.seed = options.tsne.seed;
  proj.pca_dims = static_cast<int>(X.cols());
  proj.kl_after_exaggeration = r.kl_after_exaggeration;
  proj.final_kl = r.final_kl;
  for (Eigen::Index i = 0; i < r.y.rows(); ++i) proj.points.push_back({r.y(i, 0), r.y(i, 1)});
  return proj;
}

std::vector<double> color_positions(std::span<const double> values, bool log_scale) {
  std::vector<double> v(values.begin(), values.end());
  for (auto& x : v) {
    if (!std::isfinite(x)) throw InvalidArgument("scatter values must be finite");
    if (log_scale) {
      if (x <= -1.0) throw InvalidArgument("log scale needs values > -1");
      x = std::log1p(x);
    }
  }
  if (v.empty()) return v;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double lo = *mn, span = *mx - *mn;
  for (auto& x : v) x = span > 0.0 ? (x - lo) / span : 0.0;
  return v;
}

namespace {

// Viridis anchors.
std::string colormap(double t) {
  static const std::array<std::array<double, 3>, 5> kAnchors = {{{68, 1, 84},
                                                                  {59, 82, 139},
                                                                  {33, 145, 140},
                                                                  {94, 201, 98},
                                                                  {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * (kAnchors.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), kAnchors.size() - 2);
  const double f = t - static_cast<double>(i);
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(kAnchors[i][c] * (1 - f) + kAnchors[i + 1][c] * f));
  }
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

}  // namespace

std::string render_scatter_svg(const Projection2D& proj, std::span<const double> values,
                               bool log_scale, const std::string& title) {
  if (values.size() != proj.points.size()) {
    throw InvalidArgument("scatter has " + std::to_string(proj.points.size()) +
                          " points but " + std::to_string(values.size()) + " values");
  }
  const auto colors = color_positions(values, log_scale);
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!proj.points.empty()) {
    x0 = y0 = std::numeric_limits<double>::infinity();
    x1 = y1 = -x0;
    for (const auto& p : proj.points) {
      x0 = std::min(x0, p[0]);
      x1 = std::max(x1, p[0]);
      y0 = std::min(y0, p[1]);
      y1 = std::max(y1, p[1]);
    }
  }
  const double xs = x1 > x0 ? x1 - x0 : 1.0, ys = y1 > y0 ? y1 - y0 : 1.0;
  constexpr double kSize = 500, kPad = 20, kBarX = 540, kBarW = 16;

  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"620\" height=\"560\" "
      << "font-family=\"sans-serif\" font-size=\"10\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    svg << "<text x=\"" << kPad + kSize / 2 << "\" y=\"14\" text-anchor=\"middle\" "
        << "font-size=\"12\">" << title << "</text>\n";
  }
  for (std::size_t i = 0; i < proj.points.size(); ++i) {
    const double cx = kPad + kSize * (proj.points[i][0] - x0) / xs;
    const double cy = kPad + 20 + kSize * (1.0 - (proj.points[i][1] - y0) / ys);
    svg << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"2.5\" fill=\""
        << colormap(colors[i]) << "\"/>\n";
  }
  constexpr int kSteps = 64;
  const double bar_top = kPad + 20, bar_h = kSize;
  for (int s = 0; s < kSteps; ++s) {
    const double t = 1.0 - (s + 0.5) / kSteps;
    svg << "<rect x=\"" << kBarX << "\" y=\"" << bar_top + bar_h * s / kSteps << "\" width=\""
        << kBarW << "\" height=\"" << bar_h / kSteps + 0.5 << "\" fill=\"" << colormap(t)
        << "\"/>\n";
  }
  double vmin = 0, vmax = 0;
  if (!values.empty()) {
    vmin = *std::min_element(values.begin(), values.end());
    vmax = *std::max_element(values.begin(), values.end());
  }
  svg.precision(3);
  svg << "<text x=\"" << kBarX + kBarW + 4 << "\" y=\"" << bar_top + 8 << "\">" << vmax
      << "</text>\n";
  svg << "<text x=\"" << kBarX + kBarW + 4 << "\" y=\"" << bar_top + bar_h << "\">" << vmin
      << "</text>\n";
  if (log_scale) {
    svg << "<text x=\"" << kBarX << "\" y=\"" << bar_top + bar_h + 14 << "\">log scale</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::filesystem::path emit_scatter(const Projection2D& proj, std::span<const double> values,
                                   bool log_scale, const std::filesystem::path& out,
                                   const std::string& title) {
  const std::string svg = render_scatter_svg(proj, values, log_scale, title);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + out.string());
  f << svg;
  if (!f) throw IoError("failed writing " + out.string());
  return out;
}

std::vector<std::vector<int>> knn_graph(const Mat& points, int k) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k >= n) {
    throw InvalidArgument("knn_graph: k=" + std::to_string(k) + " needs 1 <= k < N=" +
                          std::to_string(n));
  }
  const Mat d = squared_distances(points);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ui) {
    const auto i = static_cast<Eigen::Index>(ui);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n - 1));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) order.push_back(static_cast<int>(j));
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      return d(i, a) < d(i, b) || (d(i, a) == d(i, b) && a < b);
    });
    order.resize(static_cast<std::size_t>(k));
    out[ui] = std::move(order);
  });
  return out;
}

double morans_i(const std::vector<std::vector<int>>& neighbors, std::span<const double> values) {
  const std::size_t n = values.size();
  if (neighbors.size() != n || n < 2) {
    throw InvalidArgument("morans_i: neighbour lists and values must align, N >= 2");
  }
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double denom = 0.0, num = 0.0, weights = 0.0;
  for (std::size_t i = 0; i < n; ++i) denom += (values[i] - mean) * (values[i] - mean);
  if (denom == 0.0) throw DegenerateDistributionError("morans_i: constant values");
  for (std::size_t i = 0; i < n; ++i) {
    for (int j : neighbors[i]) {
      num += (values[i] - mean) * (values[j] - mean);
      weights += 1.0;
    }
  }
  return (static_cast<double>(n) / weights) * num / denom;
}

MoranTest moran_permutation_test(const Mat& points, std::span<const double> values, int k,
                                 int permutations, std::uint64_t seed) {
  if (permutations < 1) throw InvalidArgument("permutations must be positive");
  if (static_cast<Eigen::Index>(values.size()) != points.rows()) {
    throw InvalidArgument("moran test: points and values differ in length");
  }
  const auto graph = knn_graph(points, k);
  MoranTest out;
  out.statistic = morans_i(graph, values);
  out.expected = -1.0 / static_cast<double>(values.size() - 1);
  out.permutations = permutations;
  Rng rng(derive_seed(seed, {stream_tag("moran")}));
  std::vector<double> shuffled(values.begin(), values.end());
  int at_least = 0;
  for (int p = 0; p < permutations; ++p) {
    rng.shuffle(shuffled.begin(), shuffled.end());
    if (morans_i(graph, shuffled) >= out.statistic) ++at_least;
  }
  out.p_value = (1.0 + at_least) / (1.0 + permutations);
  return out;
}

}  // namespace triclip
