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

// Deterministic synthetic multimodal chips.
//
// Each chip carries four smooth latent terrain fields (vegetation, built-up,
// cropland, water). Every modality channel is a fixed nonlinear mixture of
// those fields plus independent noise, so the three sensors share spatial
// structure and the per-chip field means serve as exact downstream labels.

#ifndef TRICLIP_SYNTH_HPP_
#define TRICLIP_SYNTH_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "triclip/types.hpp"

namespace triclip {

enum class LatentFactor : std::uint8_t {
  kVegetation = 0,
  kBuiltup = 1,
  kCropland = 2,
  kWater = 3,
};
inline constexpr int kNumLatentFactors = 4;

LatentFactor factor_for(Task task);

struct SynthOptions {
  // Scales every stochastic component; 0 gives constant 0.5 fields before
  // the sparsity transform.
  double amplitude = 1.0;
  // Chip-level offset and within-chip smooth variation, in field units.
  double regional_sd = 0.2;
  double local_sd = 0.12;
  // Built-up and water fields are raised to this power (x -> x^4 by
  // default) so most chips have near-zero means.
  double sparsity_exponent = 4.0;
  // gunw is rendered at hw / gunw_scale and bilinearly upsampled.
  int gunw_scale = 4;
  // Probability that any one channel is marked unavailable. At least one
  // channel per chip always survives.
  double channel_dropout = 0.0;
};

struct LatentFields {
  std::uint64_t seed = 0;
  ChipId chip_id = 0;
  int hw = 0;
  // Row-major hw x hw maps with values in [0, 1], indexed by LatentFactor.
  std::array<std::vector<double>, kNumLatentFactors> fields;

  const std::vector<double>& field(LatentFactor f) const {
    return fields[static_cast<int>(f)];
  }
};

// Low-pass filtered noise keyed on (seed, chip_id, factor): a separable
// Gaussian blur with sigma hw/8 over white noise. Throws InvalidArgument
// for hw < 8.
LatentFields gen_latents(std::uint64_t seed, ChipId chip_id, int hw,
                         const SynthOptions& options = {});

// Channel layouts (month-major, three months):
//   s2rgbm  channel 3m+b, b in {R, G, B}
//   s1grdm  channel 3m+{0,1,2} = {log vv, log vh, log vv - log vh}
//   gunw    2..5 coherence channels, one per interferometric pair
ModalityChip render_modality(const LatentFields& latents, Modality modality,
                             double noise_level, std::uint64_t rng_seed,
                             const SynthOptions& options = {});

// Spatial mean of the task's latent field; the label oracle.
double derive_label(const LatentFields& latents, Task task);

// One complete synthetic chip: all three modalities and the four raw labels.
struct SyntheticChip {
  ChipId chip_id = 0;
  std::array<ModalityChip, kNumModalities> modalities;
  std::array<double, 4> labels{};
};

// All randomness derives from `master_seed`, so a dataset is a pure function
// of the seed and the chip ids.
SyntheticChip generate_chip(std::uint64_t master_seed, ChipId chip_id, int hw,
                            double noise_level,
                            const SynthOptions& options = {});

}  // namespace triclip

#endif  // TRICLIP_SYNTH_HPP_
