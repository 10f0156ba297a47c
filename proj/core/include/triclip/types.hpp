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

#ifndef TRICLIP_TYPES_HPP_
#define TRICLIP_TYPES_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace triclip {

using ChipId = std::int64_t;

// Sensor products. The enumerator order is the concatenation order of the
// modsconcat feature vector and the on-disk modality code.
enum class Modality : std::uint8_t { kS1grdm = 0, kS2rgbm = 1, kGunw = 2 };
inline constexpr std::array<Modality, 3> kModalities = {
    Modality::kS1grdm, Modality::kS2rgbm, Modality::kGunw};
inline constexpr int kNumModalities = 3;

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

// Downstream tasks, one per latent terrain factor.
enum class Task : std::uint8_t {
  kModisVeg = 0,
  kGhsBuilts = 1,
  kEsawcCrops = 2,
  kEsawcPwater = 3,
};
inline constexpr std::array<Task, 4> kTasks = {
    Task::kModisVeg, Task::kGhsBuilts, Task::kEsawcCrops, Task::kEsawcPwater};

std::string_view to_string(Modality m);
std::string_view to_string(Split s);
std::string_view to_string(Task t);

// Parsers throw InvalidArgument on unknown names.
Modality parse_modality(std::string_view name);
Split parse_split(std::string_view name);
Task parse_task(std::string_view name);

inline int index_of(Modality m) { return static_cast<int>(m); }
inline int index_of(Task t) { return static_cast<int>(t); }

// One chip's raster for one modality: C x H x W, channel-major, with a
// per-channel availability mask. Masked-out channels hold zeros.
struct ModalityChip {
  ChipId chip_id = 0;
  Modality modality = Modality::kS1grdm;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;
  std::vector<std::uint8_t> channel_mask;
  // Pixels of native resolution per stored pixel, 1 unless upsampled.
  int native_scale = 1;

  std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  const float* plane(int c) const { return data.data() + c * plane_size(); }
  float* plane(int c) { return data.data() + c * plane_size(); }
  int available_channels() const;

  friend bool operator==(const ModalityChip&, const ModalityChip&) = default;
};

}  // namespace triclip

#endif  // TRICLIP_TYPES_HPP_
