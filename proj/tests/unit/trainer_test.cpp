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

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "triclip/errors.hpp"
#include "triclip/trainer.hpp"

namespace triclip {
namespace {

using testing::synthetic_split;
using testing::tiny_encoder;

TrainConfig quick_config() {
  TrainConfig c;
  c.batch_size = 8;
  c.epochs = 2;
  c.learning_rate = 1e-3;
  c.seed = 5;
  c.threads = 1;
  return c;
}

std::vector<ImageTriple> frozen_batch(int n, int hw, std::uint64_t seed) {
  SplitData d = synthetic_split(Split::kTrain, seed, 0, n, hw);
  std::vector<ImageTriple> out;
  for (const auto& chip : d.chips) {
    ImageTriple t;
    for (int m = 0; m < kNumModalities; ++m) t[m] = channel_image(*chip.modalities[m], 0);
    out.push_back(std::move(t));
  }
  return out;
}

bool same_params(const TowerSet& a, const TowerSet& b) {
  if (a.log_temperature != b.log_temperature) return false;
  for (int m = 0; m < kNumModalities; ++m) {
    auto ta = a.towers[m].tensors();
    auto tb = b.towers[m].tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) {
      if (*ta[i].value != *tb[i].value) return false;
    }
  }
  return true;
}

TEST(TrainConfigTest, ValidationAndJson) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.learning_rate = -1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = quick_config();
  c.checkpoint_dir = "x/y";
  TrainConfig back = train_config_from_json(to_json(c));
  EXPECT_EQ(back.batch_size, c.batch_size);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.checkpoint_dir, c.checkpoint_dir);
  EXPECT_THROW(train_config_from_json(nlohmann::json{{"batch_size", "big"}}), InvalidArgument);
}

TEST(LearningRate, WarmupThenCosine) {
  const double base = 1e-3;
  EXPECT_DOUBLE_EQ(learning_rate_at(1, 100, base, 0.05), base / 5);
  EXPECT_DOUBLE_EQ(learning_rate_at(5, 100, base, 0.05), base);
  EXPECT_NEAR(learning_rate_at(100, 100, base, 0.05), 0.0, 1e-18);
  double prev = base;
  for (int s = 6; s <= 100; ++s) {
    double lr = learning_rate_at(s, 100, base, 0.05);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
  EXPECT_NEAR(learning_rate_at(52, 100, base, 0.05), base * 0.5 * (1 + std::cos(M_PI * 47 / 95.0)),
              1e-15);
}

TEST(SelectBest, ArgminWithEarliestTie) {
  std::vector<double> a{0.9, 0.5, 0.6};
  EXPECT_EQ(select_best(a), 1u);
  std::vector<double> b{0.5, 0.5};
  EXPECT_EQ(select_best(b), 0u);
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> h(100);
    for (double& v : h) v = std::round(rng.uniform() * 20) / 20;
    std::size_t best = 0;
    for (std::size_t i = 1; i < h.size(); ++i) {
      if (h[i] < h[best]) best = i;
    }
    EXPECT_EQ(select_best(h), best);
    std::vector<EvalRecord> recs;
    for (std::size_t i = 0; i < h.size(); ++i) recs.push_back({static_cast<std::int64_t>(i), h[i], ""});
    EXPECT_EQ(select_best(recs), best);
  }
}

TEST(BatchGradients, MatchesFiniteDifferencesOnSampledEntries) {
  TowerSet t = TowerSet::init(tiny_encoder(), 7);
  auto batch = frozen_batch(4, 16, 3);
  auto g = batch_gradients(t, batch, 1);
  EXPECT_NEAR(g.loss, batch_loss(t, batch, 1), 1e-12);
  const double h = 1e-5;
  for (int m = 0; m < kNumModalities; ++m) {
    auto params = t.towers[m].tensors();
    auto grads = std::as_const(g.grads[m]).tensors();
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (Eigen::Index k = 0; k < params[i].value->size(); k += 1 + params[i].value->size() / 5) {
        double& x = params[i].value->data()[k];
        const double orig = x;
        x = orig + h;
        double up = batch_loss(t, batch, 1);
        x = orig - h;
        double down = batch_loss(t, batch, 1);
        x = orig;
        double num = (up - down) / (2 * h);
        double an = grads[i].value->data()[k];
        EXPECT_LT(std::abs(an - num) / std::max({std::abs(an), std::abs(num), 1e-6}), 1e-4)
            << m << " " << params[i].name;
      }
    }
  }
  const double lt = t.log_temperature;
  t.log_temperature = lt + h;
  double up = batch_loss(t, batch, 1);
  t.log_temperature = lt - h;
  double down = batch_loss(t, batch, 1);
  t.log_temperature = lt;
  EXPECT_NEAR(g.d_log_temperature, (up - down) / (2 * h), 1e-6);
}

TEST(BatchGradients, WorkerCountDoesNotChangeTheLossAndIsDeterministic) {
  TowerSet t = TowerSet::init(tiny_encoder(), 7);
  auto batch = frozen_batch(6, 16, 4);
  auto g1 = batch_gradients(t, batch, 1);
  auto g3 = batch_gradients(t, batch, 3);
  auto g3b = batch_gradients(t, batch, 3);
  EXPECT_EQ(g1.loss, g3.loss);
  EXPECT_LT((g1.grads[0].head_w - g3.grads[0].head_w).norm(), 1e-12);
  EXPECT_EQ(g3.grads[1].patch_w, g3b.grads[1].patch_w);
}

TEST(AdamWTest, OneStepOnFrozenBatchDecreasesLoss) {
  auto batch = frozen_batch(6, 16, 9);
  for (double lr : {1e-3, 1e-4}) {
    TowerSet t = TowerSet::init(tiny_encoder(), 11);
    const double before = batch_loss(t, batch, 1);
    TrainConfig cfg = quick_config();
    AdamW opt(t, cfg);
    opt.step(t, batch_gradients(t, batch, 1), lr);
    EXPECT_EQ(opt.steps(), 1);
    EXPECT_LT(batch_loss(t, batch, 1), before) << "lr " << lr;
  }
}

TEST(AdamWTest, ZeroLearningRateLeavesParametersBitwise) {
  TowerSet t = TowerSet::init(tiny_encoder(), 11);
  TowerSet before = t;
  TrainConfig cfg = quick_config();
  cfg.learning_rate = 0.0;
  SplitData train_split = synthetic_split(Split::kTrain, 1, 0, 16, 16);
  SplitData val_split = synthetic_split(Split::kVal, 1, 100, 8, 16);
  train(t, train_split, val_split, cfg);
  EXPECT_TRUE(same_params(t, before));
}

TEST(AdamWTest, TemperatureStaysClamped) {
  TowerSet t = TowerSet::init(tiny_encoder(), 11);
  t.log_temperature = std::log(kMaxTemperature) - 1e-6;
  TrainConfig cfg = quick_config();
  AdamW opt(t, cfg);
  BatchGradients g;
  for (int m = 0; m < kNumModalities; ++m) g.grads[m] = EncoderParams::zeros(t.config);
  g.d_log_temperature = -1.0;
  for (int i = 0; i < 10; ++i) opt.step(t, g, 1.0);
  EXPECT_LE(t.log_temperature, std::log(kMaxTemperature) + 1e-12);
}

TEST(Train, SameSeedReproducesLossCurveExactly) {
  SplitData train_split = synthetic_split(Split::kTrain, 2, 0, 24, 16);
  SplitData val_split = synthetic_split(Split::kVal, 2, 100, 10, 16);
  TrainConfig cfg = quick_config();
  TowerSet a = TowerSet::init(tiny_encoder(), 3);
  TowerSet b = TowerSet::init(tiny_encoder(), 3);
  TrainHistory ha = train(a, train_split, val_split, cfg);
  TrainHistory hb = train(b, train_split, val_split, cfg);
  ASSERT_EQ(ha.steps.size(), 6u);
  ASSERT_EQ(ha.steps.size(), hb.steps.size());
  for (std::size_t i = 0; i < ha.steps.size(); ++i) {
    EXPECT_EQ(ha.steps[i].train_loss, hb.steps[i].train_loss);
    EXPECT_EQ(ha.steps[i].learning_rate, hb.steps[i].learning_rate);
  }
  ASSERT_EQ(ha.evals.size(), hb.evals.size());
  for (std::size_t i = 0; i < ha.evals.size(); ++i) EXPECT_EQ(ha.evals[i].val_loss, hb.evals[i].val_loss);
  EXPECT_TRUE(same_params(a, b));
  TowerSet c = TowerSet::init(tiny_encoder(), 3);
  cfg.seed = 6;
  TrainHistory hc = train(c, train_split, val_split, cfg);
  EXPECT_NE(hc.steps[0].train_loss, ha.steps[0].train_loss);
}

TEST(Train, FitsInputStatisticsOnTrainOnlyOnce) {
  SplitData train_split = synthetic_split(Split::kTrain, 2, 0, 24, 16);
  SplitData val_split = synthetic_split(Split::kVal, 2, 100, 10, 16);
  TrainConfig cfg = quick_config();
  TowerSet t = TowerSet::init(tiny_encoder(), 3);
  TrainHistory h = train(t, train_split, val_split, cfg);
  std::vector<const ModalityChip*> flat;
  for (const auto& c : train_split.chips) {
    for (Modality m : kModalities) flat.push_back(c.get(m));
  }
  EXPECT_EQ(t.input, fit_input_norm(flat));
  EXPECT_EQ(h.best.input, t.input);
  TowerSet u = TowerSet::init(tiny_encoder(), 3);
  u.input.fitted = true;
  train(u, train_split, val_split, cfg);
  EXPECT_EQ(u.input.mean, InputNorm{}.mean);
  EXPECT_EQ(u.input.sd, InputNorm{}.sd);
}

TEST(Train, EvaluationScheduleAndBestSelection) {
  SplitData train_split = synthetic_split(Split::kTrain, 2, 0, 24, 16);
  SplitData val_split = synthetic_split(Split::kVal, 2, 100, 10, 16);
  TrainConfig cfg = quick_config();
  cfg.epochs = 3;
  TowerSet t = TowerSet::init(tiny_encoder(), 3);
  TrainHistory h = train(t, train_split, val_split, cfg);
  ASSERT_EQ(h.evals.size(), 4u);
  EXPECT_EQ(h.evals[0].step, 0);
  EXPECT_EQ(h.evals.back().step, 9);
  EXPECT_EQ(h.best_eval, select_best(h.evals));
  EXPECT_NEAR(validate(h.best, val_split, cfg), h.evals[h.best_eval].val_loss, 1e-12);
  cfg.eval_every = 2;
  TowerSet u = TowerSet::init(tiny_encoder(), 3);
  TrainHistory h2 = train(u, train_split, val_split, cfg);
  std::vector<std::int64_t> steps;
  for (const auto& e : h2.evals) steps.push_back(e.step);
  EXPECT_EQ(steps, (std::vector<std::int64_t>{0, 2, 4, 6, 8, 9}));
}

TEST(Train, TestSplitNeverReadAndTagsEnforced) {
  SplitData train_split = synthetic_split(Split::kTrain, 2, 0, 16, 16);
  SplitData val_split = synthetic_split(Split::kVal, 2, 100, 8, 16);
  SplitData test_split = synthetic_split(Split::kTest, 2, 200, 8, 16);
  TrainConfig cfg = quick_config();
  TowerSet t = TowerSet::init(tiny_encoder(), 3);
  AccessLog log;
  train(t, train_split, val_split, cfg, &log);
  EXPECT_TRUE(log.touched(Split::kTrain));
  EXPECT_TRUE(log.touched(Split::kVal));
  EXPECT_FALSE(log.touched(Split::kTest));
  for (const auto& [id, split] : log.entries()) EXPECT_LT(id, 200);
  EXPECT_THROW(train(t, test_split, val_split, cfg), InvalidArgument);
  EXPECT_THROW(train(t, train_split, test_split, cfg), InvalidArgument);
  EXPECT_THROW(validate(t, test_split, cfg), InvalidArgument);
  SplitData empty_val{Split::kVal, {}};
  EXPECT_THROW(validate(t, empty_val, cfg), InvalidArgument);
}

TEST(Train, MissingModalityFailFastOrSkip) {
  SplitData train_split = synthetic_split(Split::kTrain, 2, 0, 16, 16);
  SplitData val_split = synthetic_split(Split::kVal, 2, 100, 8, 16);
  train_split.chips[3].modalities[index_of(Modality::kGunw)].reset();
  TrainConfig cfg = quick_config();
  cfg.epochs = 1;
  TowerSet t = TowerSet::init(tiny_encoder(), 3);
  EXPECT_THROW(train(t, train_split, val_split, cfg), MissingDataError);
  cfg.fail_on_missing_modality = false;
  AccessLog log;
  TrainHistory h = train(t, train_split, val_split, cfg, &log);
  for (const auto& [id, split] : log.entries()) EXPECT_NE(id, train_split.chips[3].chip_id);
  EXPECT_FALSE(h.steps.empty());
}

TEST(Train, ValidationIsIndependentOfWorkerCount) {
  SplitData val_split = synthetic_split(Split::kVal, 2, 100, 13, 16);
  TowerSet t = TowerSet::init(tiny_encoder(), 3);
  TrainConfig cfg = quick_config();
  double one = validate(t, val_split, cfg);
  cfg.threads = 3;
  EXPECT_NEAR(validate(t, val_split, cfg), one, 1e-12);
}

TEST(Train, CheckpointsAndHistoryOnDisk) {
  testing::TempDir dir("train");
  SplitData train_split = synthetic_split(Split::kTrain, 2, 0, 16, 16);
  SplitData val_split = synthetic_split(Split::kVal, 2, 100, 8, 16);
  TrainConfig cfg = quick_config();
  cfg.checkpoint_dir = (dir / "ckpt").string();
  TowerSet t = TowerSet::init(tiny_encoder(), 3);
  TrainHistory h = train(t, train_split, val_split, cfg);
  ASSERT_TRUE(std::filesystem::exists(dir / "ckpt/best/checkpoint.json"));
  Checkpoint best = load_checkpoint(dir / "ckpt/best");
  EXPECT_EQ(best.step, h.evals[h.best_eval].step);
  for (const auto& e : h.evals) EXPECT_TRUE(std::filesystem::exists(e.checkpoint));
  write_history_jsonl(h, dir / "history.jsonl");
  std::ifstream in(dir / "history.jsonl");
  std::string line;
  int lines = 0, with_val = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("step"));
    EXPECT_TRUE(j.contains("train_loss"));
    EXPECT_TRUE(j.contains("val_loss"));
    if (!j["val_loss"].is_null()) ++with_val;
    ++lines;
  }
  EXPECT_EQ(lines, 1 + static_cast<int>(h.steps.size()));
  EXPECT_EQ(with_val, static_cast<int>(h.evals.size()));
}

}  // namespace
}  // namespace triclip
