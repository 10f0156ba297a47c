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

#include "triclip/loss.hpp"

#include <cmath>

#include "triclip/errors.hpp"

namespace triclip {
namespace {

constexpr std::array<std::array<int, 2>, 3> kPairs = {{{0, 1}, {0, 2}, {1, 2}}};

void check_pair(const Mat& a, const Mat& b, double temperature) {
  if (a.rows() < 1 || a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("contrastive batches must share a non-zero N and D (got " +
                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                          " and " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
  }
  if (!(temperature > 0.0)) {
    throw InvalidArgument("temperature must be positive");
  }
}

// Row softmax of `logits` and the mean row cross-entropy against the
// diagonal.
double row_cross_entropy(const Mat& logits, Mat& softmax) {
  const Eigen::Index n = logits.rows();
  softmax.resize(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double m = logits.row(r).maxCoeff();
    softmax.row(r) = (logits.row(r).array() - m).exp().matrix();
    const double z = softmax.row(r).sum();
    softmax.row(r) /= z;
    total += m + std::log(z) - logits(r, r);
  }
  return total / static_cast<double>(n);
}

}  // namespace

void EmbeddingBatch::validate() const {
  if (rows.rows() < 1) throw InvalidArgument("embedding batch is empty");
  if (static_cast<Eigen::Index>(chip_ids.size()) != rows.rows()) {
    throw InvalidArgument("embedding batch has " + std::to_string(rows.rows()) +
                          " rows but " + std::to_string(chip_ids.size()) + " chip ids");
  }
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    if (std::abs(rows.row(r).norm() - 1.0) > 1e-5) {
      throw InvalidArgument("embedding row " + std::to_string(r) + " is not unit norm");
    }
  }
}

double pair_clip_loss(const Mat& a, const Mat& b, double temperature) {
  check_pair(a, b, temperature);
  const Mat logits = (a * b.transpose()) / temperature;
  Mat sm;
  const double rows = row_cross_entropy(logits, sm);
  const double cols = row_cross_entropy(logits.transpose(), sm);
  return 0.5 * (rows + cols);
}

PairClipResult pair_clip_loss_grad(const Mat& a, const Mat& b, double temperature) {
  check_pair(a, b, temperature);
  const Eigen::Index n = a.rows();
  const Mat logits = (a * b.transpose()) / temperature;
  Mat p_rows, p_cols;
  const double rows = row_cross_entropy(logits, p_rows);
  const double cols = row_cross_entropy(logits.transpose(), p_cols);

  // d(loss)/d(logits)
  const Mat eye = Mat::Identity(n, n);
  const Mat g = ((p_rows - eye) + (p_cols - eye).transpose()) / (2.0 * static_cast<double>(n));

  PairClipResult out;
  out.loss = 0.5 * (rows + cols);
  out.d_a = (g * b) / temperature;
  out.d_b = (g.transpose() * a) / temperature;
  out.d_log_temperature = -(g.array() * logits.array()).sum();
  return out;
}

MultiClipResult multimodal_clip_loss_grad(const std::array<Mat, kNumModalities>& batches,
                                          double temperature) {
  MultiClipResult out;
  for (int m = 0; m < kNumModalities; ++m) {
    out.d_embeddings[m] = Mat::Zero(batches[m].rows(), batches[m].cols());
  }
  const double w = 1.0 / static_cast<double>(kPairs.size());
  for (const auto& [i, j] : kPairs) {
    PairClipResult r = pair_clip_loss_grad(batches[i], batches[j], temperature);
    out.loss += w * r.loss;
    out.d_embeddings[i] += w * r.d_a;
    out.d_embeddings[j] += w * r.d_b;
    out.d_log_temperature += w * r.d_log_temperature;
  }
  return out;
}

double pair_clip_loss(const EmbeddingBatch& a, const EmbeddingBatch& b,
                      double temperature) {
  a.validate();
  b.validate();
  if (a.chip_ids != b.chip_ids) {
    throw InvalidArgument("embedding batches are not aligned by chip id");
  }
  return pair_clip_loss(a.rows, b.rows, temperature);
}

double multimodal_clip_loss(const std::array<EmbeddingBatch, kNumModalities>& batches,
                            double temperature) {
  for (const auto& b : batches) b.validate();
  for (int m = 1; m < kNumModalities; ++m) {
    if (batches[m].chip_ids != batches[0].chip_ids) {
      throw InvalidArgument("modality batches are misaligned: " +
                            std::string(to_string(batches[m].modality)) +
                            " chip ids differ from " +
                            std::string(to_string(batches[0].modality)));
    }
  }
  double total = 0.0;
  for (const auto& [i, j] : kPairs) {
    total += pair_clip_loss(batches[i].rows, batches[j].rows, temperature);
  }
  return total / static_cast<double>(kPairs.size());
}

}  // namespace triclip
