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

#include "triclip/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>

#include "triclip/errors.hpp"
#include "triclip/loss.hpp"
#include "triclip/parallel.hpp"

namespace triclip {
namespace {

int resolve_workers(int requested) { return requested > 0 ? requested : worker_count(); }

std::array<Mat, kNumModalities> forward_batch(const TowerSet& towers,
                                              std::span<const ImageTriple> batch,
                                              std::vector<EncodeTrace>* traces,
                                              int workers) {
  const std::size_t n = batch.size();
  std::array<Mat, kNumModalities> emb;
  for (auto& e : emb) e.resize(static_cast<Eigen::Index>(n), towers.config.embed_dim);
  if (traces) traces->assign(n * kNumModalities, {});
  parallel_for(
      n * kNumModalities,
      [&](std::size_t job) {
        const std::size_t b = job / kNumModalities;
        const int m = static_cast<int>(job % kNumModalities);
        EncodeTrace* trace = traces ? &(*traces)[job] : nullptr;
        emb[m].row(static_cast<Eigen::Index>(b)) =
            encode(towers.config, towers.towers[m], batch[b][m], trace).transpose();
      },
      workers);
  return emb;
}

double checked(double loss) {
  if (!std::isfinite(loss)) throw NumericError("non-finite contrastive loss");
  return loss;
}

// Gathers one sampled channel per modality for each chip.
std::vector<ImageTriple> sample_images(const TowerSet& towers,
                                       const std::vector<const ChipTriple*>& chips,
                                       Rng& rng) {
  std::vector<ImageTriple> out(chips.size());
  for (std::size_t b = 0; b < chips.size(); ++b) {
    for (Modality m : kModalities) {
      const ModalityChip* chip = chips[b]->get(m);
      out[b][index_of(m)] = input_image(towers, *chip, sample_channel(*chip, rng));
    }
  }
  return out;
}

bool complete(const ChipTriple& chip) {
  return std::all_of(kModalities.begin(), kModalities.end(),
                     [&](Modality m) { return chip.get(m) != nullptr; });
}

std::vector<const ChipTriple*> usable_chips(const SplitData& data, bool fail_fast) {
  std::vector<const ChipTriple*> out;
  for (const auto& chip : data.chips) {
    if (complete(chip)) {
      out.push_back(&chip);
      continue;
    }
    std::string msg = "chip " + std::to_string(chip.chip_id) + " (" +
                      std::string(to_string(data.split)) + ") is missing a modality";
    if (fail_fast) throw MissingDataError(msg);
    std::cerr << "warning: " << msg << "; skipped\n";
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw InvalidArgument("batch_size must be at least 2");
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (learning_rate < 0.0) throw InvalidArgument("learning_rate must be non-negative");
  if (weight_decay < 0.0) throw InvalidArgument("weight_decay must be non-negative");
  if (eval_every < 0) throw InvalidArgument("eval_every must be non-negative");
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
    throw InvalidArgument("warmup_fraction must lie in [0, 1)");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"seed", c.seed},
          {"checkpoint_dir", c.checkpoint_dir},
          {"eval_every", c.eval_every},
          {"warmup_fraction", c.warmup_fraction},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"fail_on_missing_modality", c.fail_on_missing_modality},
          {"validation_seed", c.validation_seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_dir = j.value("checkpoint_dir", c.checkpoint_dir);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.fail_on_missing_modality = j.value("fail_on_missing_modality", c.fail_on_missing_modality);
    c.validation_seed = j.value("validation_seed", c.validation_seed);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

double batch_loss(const TowerSet& towers, std::span<const ImageTriple> batch,
                  int workers) {
  auto emb = forward_batch(towers, batch, nullptr, workers);
  return multimodal_clip_loss_grad(emb, towers.temperature()).loss;
}

BatchGradients batch_gradients(const TowerSet& towers,
                               std::span<const ImageTriple> batch, int workers) {
  std::vector<EncodeTrace> traces;
  auto emb = forward_batch(towers, batch, &traces, workers);
  MultiClipResult loss = multimodal_clip_loss_grad(emb, towers.temperature());

  workers = std::max(1, std::min<int>(workers, static_cast<int>(traces.size())));
  std::vector<std::array<EncoderParams, kNumModalities>> partial(workers);
  for (auto& p : partial) {
    for (auto& g : p) g = EncoderParams::zeros(towers.config);
  }
  parallel_chunks(
      traces.size(),
      [&](int worker, std::size_t begin, std::size_t end) {
        for (std::size_t job = begin; job < end; ++job) {
          const auto b = static_cast<Eigen::Index>(job / kNumModalities);
          const int m = static_cast<int>(job % kNumModalities);
          const Vec d = loss.d_embeddings[m].row(b).transpose();
          encode_backward(towers.config, towers.towers[m], traces[job], d,
                          partial[worker][m]);
        }
      },
      workers);

  BatchGradients out;
  out.loss = loss.loss;
  out.grads = std::move(partial[0]);
  for (std::size_t w = 1; w < partial.size(); ++w) {
    for (int m = 0; m < kNumModalities; ++m) out.grads[m].add_scaled(partial[w][m], 1.0);
  }
  // The clamp has zero derivative once the temperature sits on a bound.
  out.d_log_temperature = towers.temperature_clamped() ? 0.0 : loss.d_log_temperature;
  return out;
}

AdamW::AdamW(const TowerSet& towers, const TrainConfig& config)
    : beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.adam_eps),
      weight_decay_(config.weight_decay) {
  for (int m = 0; m < kNumModalities; ++m) {
    m_[m] = EncoderParams::zeros(towers.config);
    v_[m] = EncoderParams::zeros(towers.config);
  }
}

void AdamW::step(TowerSet& towers, const BatchGradients& grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (int mod = 0; mod < kNumModalities; ++mod) {
    auto params = towers.towers[mod].tensors();
    auto g = grads.grads[mod].tensors();
    auto m = m_[mod].tensors();
    auto v = v_[mod].tensors();
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i].value->array();
      auto gi = g[i].value->array();
      auto mi = m[i].value->array();
      auto vi = v[i].value->array();
      mi = beta1_ * mi + (1.0 - beta1_) * gi;
      vi = beta2_ * vi + (1.0 - beta2_) * gi.square();
      const double decay = params[i].decay ? weight_decay_ : 0.0;
      p -= lr * ((mi / bc1) / ((vi / bc2).sqrt() + eps_) + decay * p);
    }
  }
  const double g = grads.d_log_temperature;
  temp_m_ = beta1_ * temp_m_ + (1.0 - beta1_) * g;
  temp_v_ = beta2_ * temp_v_ + (1.0 - beta2_) * g * g;
  towers.log_temperature -= lr * ((temp_m_ / bc1) / (std::sqrt(temp_v_ / bc2) + eps_));
  towers.log_temperature = std::clamp(towers.log_temperature, std::log(kMinTemperature),
                                      std::log(kMaxTemperature));
}

double learning_rate_at(std::int64_t step, std::int64_t total_steps, double base,
                        double warmup_fraction) {
  if (total_steps <= 0) return base;
  const auto warmup = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(warmup_fraction * static_cast<double>(total_steps))));
  if (step <= warmup) return base * static_cast<double>(step) / static_cast<double>(warmup);
  const double progress = static_cast<double>(step - warmup) /
                          static_cast<double>(std::max<std::int64_t>(1, total_steps - warmup));
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(1.0, progress)));
}

double validate(const TowerSet& towers, const SplitData& val, const TrainConfig& config,
                AccessLog* log) {
  if (val.split != Split::kVal) {
    throw InvalidArgument("validate() reads the val split only, got " +
                          std::string(to_string(val.split)));
  }
  const auto chips = usable_chips(val, config.fail_on_missing_modality);
  if (chips.size() < 2) throw InvalidArgument("validation split needs at least two chips");
  const int workers = resolve_workers(config.threads);
  const std::size_t bs = std::min<std::size_t>(config.batch_size, chips.size());

  double total = 0.0;
  std::size_t batches = 0;
  // Every batch holds exactly bs chips so all share one chance level; a
  // ragged tail is covered by the final bs chips, overlapping the previous
  // batch.
  for (std::size_t start = 0; start < chips.size(); start += bs) {
    start = std::min(start, chips.size() - bs);
    const std::size_t end = start + bs;
    std::vector<const ChipTriple*> batch(chips.begin() + static_cast<std::ptrdiff_t>(start),
                                         chips.begin() + static_cast<std::ptrdiff_t>(end));
    if (log) {
      for (const auto* c : batch) log->record(c->chip_id, val.split);
    }
    Rng rng(derive_seed(config.validation_seed, {stream_tag("val"), batches}));
    const auto images = sample_images(towers, batch, rng);
    total += checked(batch_loss(towers, images, workers));
    ++batches;
  }
  return total / static_cast<double>(batches);
}

TrainHistory train(TowerSet& towers, const SplitData& train_data, const SplitData& val,
                   const TrainConfig& config, AccessLog* log, const StepCallback& on_step) {
  config.validate();
  if (train_data.split != Split::kTrain) {
    throw InvalidArgument("train() reads the train split only, got " +
                          std::string(to_string(train_data.split)));
  }
  const auto chips = usable_chips(train_data, config.fail_on_missing_modality);
  if (chips.size() < 2) throw InvalidArgument("training split needs at least two chips");
  if (!towers.input.fitted) {
    std::vector<const ModalityChip*> flat;
    for (const auto* c : chips) {
      for (Modality m : kModalities) flat.push_back(c->get(m));
    }
    towers.input = fit_input_norm(flat);
  }

  const int workers = resolve_workers(config.threads);
  const std::size_t bs = std::min<std::size_t>(config.batch_size, chips.size());
  const std::size_t steps_per_epoch = chips.size() / bs;
  const auto total_steps = static_cast<std::int64_t>(steps_per_epoch) * config.epochs;

  TrainHistory history;
  std::int64_t step = 0;
  double best_loss = 0.0;
  auto evaluate = [&] {
    EvalRecord rec{step, validate(towers, val, config, log), {}};
    if (!config.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%08lld", static_cast<long long>(step));
      auto dir = std::filesystem::path(config.checkpoint_dir) / name;
      save_checkpoint(towers, step, rec.val_loss, dir);
      rec.checkpoint = dir.string();
    }
    if (history.evals.empty() || rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      history.best = towers;
      history.best_eval = history.evals.size();
    }
    history.evals.push_back(std::move(rec));
  };

  evaluate();
  AdamW optimizer(towers, config);
  std::vector<std::size_t> order(chips.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, {stream_tag("epoch"), static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order.begin(), order.end());
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      ++step;
      std::vector<const ChipTriple*> batch;
      batch.reserve(bs);
      for (std::size_t i = s * bs; i < (s + 1) * bs; ++i) batch.push_back(chips[order[i]]);
      if (log) {
        for (const auto* c : batch) log->record(c->chip_id, train_data.split);
      }
      Rng channel_rng(derive_seed(config.seed, {stream_tag("channels"), static_cast<std::uint64_t>(step)}));
      const auto images = sample_images(towers, batch, channel_rng);
      const BatchGradients grads = batch_gradients(towers, images, workers);
      checked(grads.loss);
      const double lr = learning_rate_at(step, total_steps, config.learning_rate,
                                         config.warmup_fraction);
      optimizer.step(towers, grads, lr);
      history.steps.push_back({step, grads.loss, lr});
      if (on_step) on_step(history.steps.back());

      const bool last = step == total_steps;
      const bool due = config.eval_every > 0 ? step % config.eval_every == 0
                                             : s + 1 == steps_per_epoch;
      if (due || last) evaluate();
    }
  }

  if (!config.checkpoint_dir.empty()) {
    const auto& best = history.evals[history.best_eval];
    save_checkpoint(history.best, best.step, best.val_loss,
                    std::filesystem::path(config.checkpoint_dir) / "best");
  }
  return history;
}

std::size_t select_best(std::span<const double> val_losses) {
  if (val_losses.empty()) throw InvalidArgument("no evaluated checkpoints to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_losses.size(); ++i) {
    if (val_losses[i] < val_losses[best]) best = i;
  }
  return best;
}

std::size_t select_best(std::span<const EvalRecord> history) {
  std::vector<double> losses;
  losses.reserve(history.size());
  for (const auto& e : history) losses.push_back(e.val_loss);
  return select_best(losses);
}

void write_history_jsonl(const TrainHistory& history, const std::filesystem::path& path) {
  std::map<std::int64_t, std::pair<nlohmann::json, nlohmann::json>> rows;
  for (const auto& s : history.steps) rows[s.step].first = s.train_loss;
  for (const auto& e : history.evals) rows[e.step].second = e.val_loss;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [step, values] : rows) {
    nlohmann::json line = {{"step", step}, {"train_loss", values.first}, {"val_loss", values.second}};
    out << line.dump() << '\n';
  }
}

}  // namespace triclip
