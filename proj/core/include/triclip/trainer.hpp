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

// Contrastive pretraining of the three towers.
//
// Each step draws a batch of training chips, samples one available channel
// per chip and modality, encodes, evaluates the three-pair CLIP loss and
// applies one AdamW update. Validation uses a dedicated channel-sampling
// seed so scores are comparable across checkpoints; the checkpoint with the
// lowest validation loss is the selected model.

#ifndef TRICLIP_TRAINER_HPP_
#define TRICLIP_TRAINER_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triclip/datastore.hpp"
#include "triclip/model.hpp"

namespace triclip {

struct TrainConfig {
  int batch_size = 8;
  int epochs = 20;
  double learning_rate = 1e-3;
  double weight_decay = 0.05;
  std::uint64_t seed = 0;
  std::string checkpoint_dir;  // empty: keep checkpoints in memory only
  int eval_every = 0;          // steps between validations; 0 = once per epoch
  double warmup_fraction = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool fail_on_missing_modality = true;
  std::uint64_t validation_seed = 0x76616c6964ULL;
  int threads = 0;  // 0: worker_count()

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// One single-channel image per modality, in Modality order.
using ImageTriple = std::array<Mat, kNumModalities>;

struct BatchGradients {
  double loss = 0.0;
  std::array<EncoderParams, kNumModalities> grads;
  double d_log_temperature = 0.0;
};

double batch_loss(const TowerSet& towers, std::span<const ImageTriple> batch,
                  int workers = 1);

// Per-image backward passes are split into contiguous chunks, one per
// worker, and the worker accumulators are summed in worker order.
BatchGradients batch_gradients(const TowerSet& towers,
                               std::span<const ImageTriple> batch,
                               int workers = 1);

// Decoupled-weight-decay Adam over all three towers and the log-temperature.
class AdamW {
 public:
  AdamW(const TowerSet& towers, const TrainConfig& config);
  void step(TowerSet& towers, const BatchGradients& grads, double learning_rate);
  std::int64_t steps() const { return t_; }

 private:
  std::array<EncoderParams, kNumModalities> m_, v_;
  double temp_m_ = 0.0, temp_v_ = 0.0;
  double beta1_, beta2_, eps_, weight_decay_;
  std::int64_t t_ = 0;
};

// Linear warmup over the first warmup_fraction of steps, then cosine decay
// to zero. `step` is 1-based.
double learning_rate_at(std::int64_t step, std::int64_t total_steps,
                        double base, double warmup_fraction);

struct StepRecord {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double learning_rate = 0.0;
};

struct EvalRecord {
  std::int64_t step = 0;
  double val_loss = 0.0;
  std::string checkpoint;  // directory, when written to disk
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;  // evals[0] is the untrained model
  std::size_t best_eval = 0;
  TowerSet best;
};

using StepCallback = std::function<void(const StepRecord&)>;

// `train` must be tagged Split::kTrain and `val` Split::kVal. Every chip
// handed to the model is recorded in `log`. Throws MissingDataError when a
// chip lacks a modality and fail_on_missing_modality is set, NumericError
// on a non-finite loss. Input statistics are fitted on `train` first
// unless `towers` already carries fitted ones.
TrainHistory train(TowerSet& towers, const SplitData& train, const SplitData& val,
                   const TrainConfig& config, AccessLog* log = nullptr,
                   const StepCallback& on_step = nullptr);

// Mean CLIP loss over consecutive validation batches of
// min(config.batch_size, N) chips; a ragged tail is covered by the last full
// batch of chips. Throws InvalidArgument on an empty or wrongly tagged split.
double validate(const TowerSet& towers, const SplitData& val,
                const TrainConfig& config, AccessLog* log = nullptr);

// Argmin with ties resolved to the earliest entry.
std::size_t select_best(std::span<const double> val_losses);
std::size_t select_best(std::span<const EvalRecord> history);

// One JSON object per line: {"step", "train_loss", "val_loss"}; absent
// values are null.
void write_history_jsonl(const TrainHistory& history,
                         const std::filesystem::path& path);

}  // namespace triclip

#endif  // TRICLIP_TRAINER_HPP_
