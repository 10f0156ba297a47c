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
#include <numeric>

#include "test_support.hpp"
#include "triclip/errors.hpp"
#include "triclip/synth.hpp"

namespace triclip {
namespace {

using testing::pearson;

std::vector<double> plane_values(const ModalityChip& chip, int c) {
  return {chip.plane(c), chip.plane(c) + chip.plane_size()};
}

TEST(GenLatents, DeterministicBitwise) {
  LatentFields a = gen_latents(11, 5, 32);
  LatentFields b = gen_latents(11, 5, 32);
  for (int f = 0; f < kNumLatentFactors; ++f) EXPECT_EQ(a.fields[f], b.fields[f]);
}

TEST(GenLatents, SeedsDifferInMostPixels) {
  LatentFields a = gen_latents(1, 3, 32);
  LatentFields b = gen_latents(2, 3, 32);
  for (int f = 0; f < kNumLatentFactors; ++f) {
    std::size_t differ = 0;
    for (std::size_t i = 0; i < a.fields[f].size(); ++i) {
      if (std::abs(a.fields[f][i] - b.fields[f][i]) > 1e-6) ++differ;
    }
    EXPECT_GE(differ * 2, a.fields[f].size()) << "factor " << f;
  }
}

TEST(GenLatents, ZeroAmplitudeGivesHalfFields) {
  SynthOptions opt;
  opt.amplitude = 0.0;
  opt.sparsity_exponent = 1.0;
  LatentFields l = gen_latents(4, 0, 16, opt);
  for (const auto& f : l.fields) {
    for (double v : f) EXPECT_EQ(v, 0.5);
  }
}

TEST(GenLatents, RangeAndSmoothness) {
  for (ChipId id = 0; id < 20; ++id) {
    LatentFields l = gen_latents(9, id, 64);
    for (const auto& f : l.fields) {
      ASSERT_EQ(f.size(), 64u * 64u);
      double diff = 0.0;
      for (int r = 0; r < 64; ++r) {
        for (int c = 0; c + 1 < 64; ++c) diff += std::abs(f[r * 64 + c + 1] - f[r * 64 + c]);
      }
      EXPECT_LT(diff / (64 * 63), 0.5);
      EXPECT_GE(*std::min_element(f.begin(), f.end()), 0.0);
      EXPECT_LE(*std::max_element(f.begin(), f.end()), 1.0);
    }
  }
}

TEST(GenLatents, RejectsTinyChips) { EXPECT_THROW(gen_latents(0, 0, 7), InvalidArgument); }

TEST(GenLatents, SparseFactorsAreZeroInflated) {
  std::vector<double> veg, built, water;
  for (ChipId id = 0; id < 300; ++id) {
    LatentFields l = gen_latents(21, id, 16);
    veg.push_back(derive_label(l, Task::kModisVeg));
    built.push_back(derive_label(l, Task::kGhsBuilts));
    water.push_back(derive_label(l, Task::kEsawcPwater));
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (const auto* sparse : {&built, &water}) {
    EXPECT_LT(median(*sparse), 0.25 * median(veg));
    EXPECT_GT(mean(*sparse), median(*sparse));
  }
  EXPECT_GT(median(veg), 0.3);
}

TEST(RenderModality, ChannelCountsAndShapes) {
  for (ChipId id = 0; id < 40; ++id) {
    SyntheticChip chip = generate_chip(3, id, 32, 0.05);
    const auto& s1 = chip.modalities[index_of(Modality::kS1grdm)];
    const auto& s2 = chip.modalities[index_of(Modality::kS2rgbm)];
    const auto& gw = chip.modalities[index_of(Modality::kGunw)];
    EXPECT_EQ(s1.channels, 9);
    EXPECT_EQ(s2.channels, 9);
    EXPECT_GE(gw.channels, 2);
    EXPECT_LE(gw.channels, 5);
    for (const auto* m : {&s1, &s2, &gw}) {
      EXPECT_EQ(m->height, 32);
      EXPECT_EQ(m->width, 32);
      EXPECT_EQ(m->data.size(), static_cast<std::size_t>(m->channels) * 32 * 32);
      EXPECT_GE(m->available_channels(), 1);
      EXPECT_EQ(m->chip_id, id);
    }
    EXPECT_EQ(gw.native_scale, 4);
  }
}

TEST(RenderModality, GunwChannelCountCoversRange) {
  std::array<int, 6> seen{};
  for (ChipId id = 0; id < 200; ++id) {
    LatentFields l = gen_latents(5, id, 16);
    seen[render_modality(l, Modality::kGunw, 0.0, 77).channels]++;
  }
  for (int c = 2; c <= 5; ++c) EXPECT_GT(seen[c], 20) << c;
}

TEST(RenderModality, NoiselessMonthsIdentical) {
  LatentFields l = gen_latents(8, 2, 32);
  ModalityChip s2 = render_modality(l, Modality::kS2rgbm, 0.0, 1);
  ModalityChip s1 = render_modality(l, Modality::kS1grdm, 0.0, 1);
  for (int band = 0; band < 3; ++band) {
    EXPECT_EQ(plane_values(s2, band), plane_values(s2, 3 + band));
    EXPECT_EQ(plane_values(s2, band), plane_values(s2, 6 + band));
    EXPECT_EQ(plane_values(s1, band), plane_values(s1, 3 + band));
  }
}

TEST(RenderModality, LogDifferenceChannel) {
  LatentFields l = gen_latents(8, 2, 32);
  ModalityChip s1 = render_modality(l, Modality::kS1grdm, 0.2, 1);
  for (int month = 0; month < 3; ++month) {
    for (std::size_t i = 0; i < s1.plane_size(); ++i) {
      EXPECT_EQ(s1.plane(3 * month + 2)[i], s1.plane(3 * month)[i] - s1.plane(3 * month + 1)[i]);
    }
  }
}

TEST(RenderModality, NoisyMonthsDiffer) {
  LatentFields l = gen_latents(8, 2, 32);
  ModalityChip s2 = render_modality(l, Modality::kS2rgbm, 0.1, 1);
  EXPECT_NE(plane_values(s2, 0), plane_values(s2, 3));
}

TEST(RenderModality, RejectsNegativeNoise) {
  LatentFields l = gen_latents(8, 2, 16);
  EXPECT_THROW(render_modality(l, Modality::kS2rgbm, -0.1, 1), InvalidArgument);
  EXPECT_THROW(render_modality(l, static_cast<Modality>(7), 0.1, 1), InvalidArgument);
}

TEST(RenderModality, CrossModalCorrelationSurvivesOnlyTruePairs) {
  constexpr int kChips = 100;
  std::vector<std::vector<double>> s2(kChips), s1(kChips);
  for (int i = 0; i < kChips; ++i) {
    SyntheticChip chip = generate_chip(2024, i, 64, 0.1);
    s2[i] = plane_values(chip.modalities[index_of(Modality::kS2rgbm)], 0);
    s1[i] = plane_values(chip.modalities[index_of(Modality::kS1grdm)], 0);
  }
  double paired = 0.0, shuffled = 0.0;
  for (int i = 0; i < kChips; ++i) {
    paired += pearson(s2[i], s1[i]);
    shuffled += pearson(s2[i], s1[(i + 37) % kChips]);
  }
  paired /= kChips;
  shuffled /= kChips;
  EXPECT_GT(paired, 0.3);
  EXPECT_LT(std::abs(shuffled), 0.05);
}

TEST(RenderModality, ChannelDropoutKeepsOneChannelAndZeroesMasked) {
  SynthOptions opt;
  opt.channel_dropout = 0.9;
  int masked = 0;
  for (ChipId id = 0; id < 50; ++id) {
    SyntheticChip chip = generate_chip(6, id, 16, 0.05, opt);
    for (const auto& m : chip.modalities) {
      EXPECT_GE(m.available_channels(), 1);
      for (int c = 0; c < m.channels; ++c) {
        if (m.channel_mask[c]) continue;
        ++masked;
        for (std::size_t i = 0; i < m.plane_size(); ++i) ASSERT_EQ(m.plane(c)[i], 0.0f);
      }
    }
  }
  EXPECT_GT(masked, 0);
}

TEST(DeriveLabel, ConstantAndRampFields) {
  LatentFields l;
  l.hw = 16;
  for (auto& f : l.fields) f.assign(256, 0.5);
  EXPECT_DOUBLE_EQ(derive_label(l, Task::kModisVeg), 0.5);
  auto& veg = l.fields[static_cast<int>(LatentFactor::kVegetation)];
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) veg[r * 16 + c] = c / 15.0;
  EXPECT_NEAR(derive_label(l, Task::kModisVeg), 0.5, 1.0 / 32);
}

TEST(DeriveLabel, MatchesIndependentSummation) {
  for (ChipId id = 0; id < 100; ++id) {
    SyntheticChip chip = generate_chip(77, id, 16, 0.0);
    LatentFields l = gen_latents(77, id, 16);
    for (Task t : kTasks) {
      const auto& f = l.field(factor_for(t));
      long double sum = 0;
      for (double v : f) sum += v;
      EXPECT_NEAR(chip.labels[index_of(t)], static_cast<double>(sum / f.size()), 1e-6);
    }
  }
}

TEST(GenerateChip, PureFunctionOfSeedAndId) {
  SyntheticChip a = generate_chip(5, 17, 32, 0.1);
  SyntheticChip b = generate_chip(5, 17, 32, 0.1);
  for (int m = 0; m < kNumModalities; ++m) EXPECT_EQ(a.modalities[m], b.modalities[m]);
  EXPECT_EQ(a.labels, b.labels);
  SyntheticChip c = generate_chip(6, 17, 32, 0.1);
  EXPECT_NE(a.modalities[0], c.modalities[0]);
}

}  // namespace
}  // namespace triclip
