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

// Rectangular chip grids over an abstract planar area of interest, with
// geography-aware train/val/test assignment in column bands.

#ifndef TRICLIP_GRID_HPP_
#define TRICLIP_GRID_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triclip/types.hpp"

namespace triclip {

struct GridChip {
  ChipId id = 0;
  int row = 0;
  int col = 0;
  Split split = Split::kTrain;

  friend bool operator==(const GridChip&, const GridChip&) = default;
};

struct ChipIndex {
  std::string aoi_name;
  int chip_size_m = 448;
  int rows = 0;
  int cols = 0;
  // Row-major: chips[id] has id == row * cols + col.
  std::vector<GridChip> chips;
  // Set by assign_splits when the realised fractions miss 60/20/20 by more
  // than five percentage points.
  bool ratio_violation = false;

  const GridChip& chip(ChipId id) const;
  std::vector<ChipId> ids_in(Split split) const;
  double fraction(Split split) const;

  friend bool operator==(const ChipIndex&, const ChipIndex&) = default;
};

// The canonical cycle T,T,T,V,E.
std::vector<Split> default_split_pattern();

// Parses compact patterns such as "TTTVE" (T=train, V=val, E=test).
std::vector<Split> parse_split_pattern(std::string_view pattern);

// Every chip starts in the train split. Throws InvalidArgument on
// non-positive dimensions.
ChipIndex build_grid(std::string aoi_name, int rows, int cols,
                     int chip_size_m = 448);

// Groups columns into contiguous bands of `band_width_chips` and gives each
// band one split from the cycled pattern. The seed rotates the starting
// phase of the cycle (seed 0 starts at the first pattern element).
//
// Throws InvalidArgument when the band is wider than the grid or the pattern
// is not a 3:1:1 train:val:test multiset.
ChipIndex assign_splits(const ChipIndex& index, int band_width_chips,
                        std::span<const Split> pattern, std::uint64_t seed);

nlohmann::json to_json(const ChipIndex& index);
ChipIndex chip_index_from_json(const nlohmann::json& j);

void save_chip_index(const ChipIndex& index, const std::filesystem::path& path);
ChipIndex load_chip_index(const std::filesystem::path& path);

}  // namespace triclip

#endif  // TRICLIP_GRID_HPP_
