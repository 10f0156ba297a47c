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

// Symmetric InfoNCE over aligned embedding batches.
//
// For two N x D batches A and B with rows paired by chip, the logits are
// L = A B^T / temperature and the loss is the mean of the row-wise and
// column-wise cross-entropies against the diagonal. Three modalities are
// combined by averaging the loss over the three unordered pairs.

#ifndef TRICLIP_LOSS_HPP_
#define TRICLIP_LOSS_HPP_

#include <array>
#include <vector>

#include "triclip/model.hpp"
#include "triclip/types.hpp"

namespace triclip {

struct EmbeddingBatch {
  Mat rows;  // N x D, unit-norm rows
  Modality modality = Modality::kS1grdm;
  std::vector<ChipId> chip_ids;

  // Throws InvalidArgument when N == 0, ids misaligned with rows, or a row
  // is off unit norm by more than 1e-5.
  void validate() const;
};

struct PairClipResult {
  double loss = 0.0;
  Mat d_a, d_b;
  // d(loss)/d(log temperature)
  double d_log_temperature = 0.0;
};

struct MultiClipResult {
  double loss = 0.0;
  std::array<Mat, kNumModalities> d_embeddings;
  double d_log_temperature = 0.0;
};

// Raw-matrix forms used inside the training loop. Throw InvalidArgument on
// mismatched shapes or non-positive temperature.
double pair_clip_loss(const Mat& a, const Mat& b, double temperature);
PairClipResult pair_clip_loss_grad(const Mat& a, const Mat& b, double temperature);
MultiClipResult multimodal_clip_loss_grad(const std::array<Mat, kNumModalities>& batches,
                                          double temperature);

// Validated forms: rows must be unit norm and chip ids aligned.
double pair_clip_loss(const EmbeddingBatch& a, const EmbeddingBatch& b,
                      double temperature);
double multimodal_clip_loss(const std::array<EmbeddingBatch, kNumModalities>& batches,
                            double temperature);

}  // namespace triclip

#endif  // TRICLIP_LOSS_HPP_
