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

#include "triclip/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "triclip/errors.hpp"
#include "triclip/rng.hpp"

namespace triclip {
namespace {

constexpr int kMonths = 3;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  }
  double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= sum;
  return k;
}

// Separable blur with reflected borders.
std::vector<double> blur(const std::vector<double>& src, int hw,
                         const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(src.size()), out(src.size());
  for (int r = 0; r < hw; ++r) {
    for (int c = 0; c < hw; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * src[r * hw + reflect(c + k, hw)];
      }
      tmp[r * hw + c] = acc;
    }
  }
  for (int r = 0; r < hw; ++r) {
    for (int c = 0; c < hw; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * tmp[reflect(r + k, hw) * hw + c];
      }
      out[r * hw + c] = acc;
    }
  }
  return out;
}

// Latent values at one pixel, in LatentFactor order.
struct Pixel {
  double veg, built, crop, water;
};

Pixel pixel_at(const std::array<std::vector<double>, kNumLatentFactors>& f,
               std::size_t i) {
  return {f[0][i], f[1][i], f[2][i], f[3][i]};
}

// Optical reflectance per RGB band.
double optical(const Pixel& p, int band) {
  switch (band) {
    case 0: return sigmoid(3.0 * (-1.2 * p.veg + 1.0 * p.crop + 1.5 * p.built - 0.6 * p.water + 0.1));
    case 1: return sigmoid(3.0 * (0.8 * p.veg + 0.6 * p.crop + 1.2 * p.built - 0.8 * p.water - 0.4));
    default: return sigmoid(3.0 * (-0.6 * p.veg + 0.3 * p.crop + 1.3 * p.built + 0.9 * p.water - 0.2));
  }
}

// Natural-log backscatter for vv (pol 0) and vh (pol 1).
double log_backscatter(const Pixel& p, int pol) {
  if (pol == 0) {
    return std::log(0.03 + 0.4 * sigmoid(2.5 * (-1.0 * p.veg + 1.2 * p.crop + 1.8 * p.built - 2.0 * p.water)));
  }
  return std::log(0.01 + 0.2 * sigmoid(2.5 * (1.4 * p.veg + 0.5 * p.crop + 1.0 * p.built - 1.8 * p.water - 0.5)));
}

// Interferometric coherence for pair k; longer temporal baselines (larger k)
// decorrelate faster.
double coherence(const Pixel& p, int pair) {
  const double baseline = 1.0 - 0.12 * pair;
  return sigmoid(2.5 * baseline *
                 (1.5 * p.built - 1.0 * p.veg + 0.6 * p.crop - 1.5 * p.water + 0.2));
}

ModalityChip make_chip(ChipId id, Modality m, int channels, int hw) {
  ModalityChip chip;
  chip.chip_id = id;
  chip.modality = m;
  chip.channels = channels;
  chip.height = hw;
  chip.width = hw;
  chip.data.assign(static_cast<std::size_t>(channels) * hw * hw, 0.0f);
  chip.channel_mask.assign(channels, 1);
  return chip;
}

// Bilinear resampling of a low x low map to hw x hw (half-pixel centres).
std::vector<double> upsample_bilinear(const std::vector<double>& src, int low,
                                      int hw) {
  std::vector<double> out(static_cast<std::size_t>(hw) * hw);
  const double scale = static_cast<double>(low) / hw;
  for (int r = 0; r < hw; ++r) {
    double y = std::clamp((r + 0.5) * scale - 0.5, 0.0, low - 1.0);
    int y0 = static_cast<int>(std::floor(y));
    int y1 = std::min(y0 + 1, low - 1);
    double fy = y - y0;
    for (int c = 0; c < hw; ++c) {
      double x = std::clamp((c + 0.5) * scale - 0.5, 0.0, low - 1.0);
      int x0 = static_cast<int>(std::floor(x));
      int x1 = std::min(x0 + 1, low - 1);
      double fx = x - x0;
      double top = src[y0 * low + x0] * (1 - fx) + src[y0 * low + x1] * fx;
      double bot = src[y1 * low + x0] * (1 - fx) + src[y1 * low + x1] * fx;
      out[r * hw + c] = top * (1 - fy) + bot * fy;
    }
  }
  return out;
}

// Box-averages every latent field down to low x low.
std::array<std::vector<double>, kNumLatentFactors> downsample(
    const LatentFields& latents, int low) {
  const int hw = latents.hw;
  std::array<std::vector<double>, kNumLatentFactors> out;
  for (int f = 0; f < kNumLatentFactors; ++f) {
    out[f].assign(static_cast<std::size_t>(low) * low, 0.0);
    std::vector<int> counts(out[f].size(), 0);
    for (int r = 0; r < hw; ++r) {
      for (int c = 0; c < hw; ++c) {
        int lr = std::min(low - 1, r * low / hw);
        int lc = std::min(low - 1, c * low / hw);
        out[f][lr * low + lc] += latents.fields[f][r * hw + c];
        counts[lr * low + lc]++;
      }
    }
    for (std::size_t i = 0; i < out[f].size(); ++i) out[f][i] /= counts[i];
  }
  return out;
}

void apply_dropout(ModalityChip& chip, double p, Rng& rng) {
  if (p <= 0.0) return;
  for (int c = 0; c < chip.channels; ++c) {
    if (rng.uniform() < p) chip.channel_mask[c] = 0;
  }
  if (chip.available_channels() == 0) {
    chip.channel_mask[rng.below(chip.channels)] = 1;
  }
  for (int c = 0; c < chip.channels; ++c) {
    if (!chip.channel_mask[c]) {
      std::fill_n(chip.plane(c), chip.plane_size(), 0.0f);
    }
  }
}

}  // namespace

LatentFactor factor_for(Task task) {
  switch (task) {
    case Task::kModisVeg: return LatentFactor::kVegetation;
    case Task::kGhsBuilts: return LatentFactor::kBuiltup;
    case Task::kEsawcCrops: return LatentFactor::kCropland;
    case Task::kEsawcPwater: return LatentFactor::kWater;
  }
  throw InvalidArgument("unknown task");
}

LatentFields gen_latents(std::uint64_t seed, ChipId chip_id, int hw,
                         const SynthOptions& options) {
  if (hw < 8) {
    throw InvalidArgument("latent field size must be at least 8, got " +
                          std::to_string(hw));
  }
  LatentFields out;
  out.seed = seed;
  out.chip_id = chip_id;
  out.hw = hw;
  const auto kernel = gaussian_kernel(hw / 8.0);
  // Blurred unit white noise has variance sum(k^2)^2 for a separable kernel.
  double k2 = 0.0;
  for (double v : kernel) k2 += v * v;
  const double noise_sd = k2;

  const std::size_t n = static_cast<std::size_t>(hw) * hw;
  for (int f = 0; f < kNumLatentFactors; ++f) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(chip_id),
                               static_cast<std::uint64_t>(f)}));
    const double regional = rng.normal();
    std::vector<double> noise(n);
    for (double& v : noise) v = rng.normal();
    std::vector<double> smooth = blur(noise, hw, kernel);

    const bool sparse = f == static_cast<int>(LatentFactor::kBuiltup) ||
                        f == static_cast<int>(LatentFactor::kWater);
    auto& field = out.fields[f];
    field.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.5 + options.amplitude *
                           (options.regional_sd * regional +
                            options.local_sd * smooth[i] / noise_sd);
      v = std::clamp(v, 0.0, 1.0);
      if (sparse) v = std::pow(v, options.sparsity_exponent);
      field[i] = v;
    }
  }
  return out;
}

ModalityChip render_modality(const LatentFields& latents, Modality modality,
                             double noise_level, std::uint64_t rng_seed,
                             const SynthOptions& options) {
  if (noise_level < 0.0) {
    throw InvalidArgument("noise level must be non-negative");
  }
  const int hw = latents.hw;
  const std::size_t n = static_cast<std::size_t>(hw) * hw;
  const auto id_key = static_cast<std::uint64_t>(latents.chip_id);
  Rng noise(derive_seed(rng_seed, {id_key, static_cast<std::uint64_t>(modality),
                                   stream_tag("noise")}));
  Rng mask_rng(derive_seed(rng_seed, {id_key, static_cast<std::uint64_t>(modality),
                                      stream_tag("mask")}));

  switch (modality) {
    case Modality::kS2rgbm: {
      ModalityChip chip = make_chip(latents.chip_id, modality, 3 * kMonths, hw);
      for (int month = 0; month < kMonths; ++month) {
        for (int band = 0; band < 3; ++band) {
          float* out = chip.plane(3 * month + band);
          for (std::size_t i = 0; i < n; ++i) {
            out[i] = static_cast<float>(optical(pixel_at(latents.fields, i), band) +
                                        noise_level * noise.normal());
          }
        }
      }
      apply_dropout(chip, options.channel_dropout, mask_rng);
      return chip;
    }
    case Modality::kS1grdm: {
      ModalityChip chip = make_chip(latents.chip_id, modality, 3 * kMonths, hw);
      for (int month = 0; month < kMonths; ++month) {
        float* vv = chip.plane(3 * month);
        float* vh = chip.plane(3 * month + 1);
        float* diff = chip.plane(3 * month + 2);
        for (std::size_t i = 0; i < n; ++i) {
          Pixel p = pixel_at(latents.fields, i);
          vv[i] = static_cast<float>(log_backscatter(p, 0) + noise_level * noise.normal());
          vh[i] = static_cast<float>(log_backscatter(p, 1) + noise_level * noise.normal());
          diff[i] = vv[i] - vh[i];
        }
      }
      apply_dropout(chip, options.channel_dropout, mask_rng);
      return chip;
    }
    case Modality::kGunw: {
      Rng count_rng(derive_seed(rng_seed, {id_key, static_cast<std::uint64_t>(modality),
                                           stream_tag("pairs")}));
      const int pairs = 2 + static_cast<int>(count_rng.below(4));
      const int scale = std::max(1, options.gunw_scale);
      const int low = std::max(1, hw / scale);
      const auto coarse = downsample(latents, low);
      ModalityChip chip = make_chip(latents.chip_id, modality, pairs, hw);
      chip.native_scale = scale;
      std::vector<double> plane(static_cast<std::size_t>(low) * low);
      for (int k = 0; k < pairs; ++k) {
        for (std::size_t i = 0; i < plane.size(); ++i) {
          plane[i] = std::clamp(
              coherence(pixel_at(coarse, i), k) + noise_level * noise.normal(),
              0.0, 1.0);
        }
        auto up = upsample_bilinear(plane, low, hw);
        std::transform(up.begin(), up.end(), chip.plane(k),
                       [](double v) { return static_cast<float>(v); });
      }
      apply_dropout(chip, options.channel_dropout, mask_rng);
      return chip;
    }
  }
  throw InvalidArgument("unknown modality code " +
                        std::to_string(static_cast<int>(modality)));
}

double derive_label(const LatentFields& latents, Task task) {
  const auto& f = latents.field(factor_for(task));
  if (f.empty()) throw InvalidArgument("empty latent field");
  return std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
}

SyntheticChip generate_chip(std::uint64_t master_seed, ChipId chip_id, int hw,
                            double noise_level, const SynthOptions& options) {
  const auto latents = gen_latents(master_seed, chip_id, hw, options);
  const auto render_seed = derive_seed(master_seed, {stream_tag("render")});
  SyntheticChip out;
  out.chip_id = chip_id;
  for (Modality m : kModalities) {
    out.modalities[index_of(m)] =
        render_modality(latents, m, noise_level, render_seed, options);
  }
  for (Task t : kTasks) out.labels[index_of(t)] = derive_label(latents, t);
  return out;
}

}  // namespace triclip
