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

#include "triclip/grid.hpp"

#include <cmath>
#include <fstream>

#include "triclip/errors.hpp"
#include "triclip/json_io.hpp"

namespace triclip {

const GridChip& ChipIndex::chip(ChipId id) const {
  if (id < 0 || id >= static_cast<ChipId>(chips.size())) {
    throw InvalidArgument("chip id " + std::to_string(id) +
                          " is outside the grid of " + aoi_name);
  }
  return chips[static_cast<std::size_t>(id)];
}

std::vector<ChipId> ChipIndex::ids_in(Split split) const {
  std::vector<ChipId> ids;
  for (const auto& c : chips) {
    if (c.split == split) ids.push_back(c.id);
  }
  return ids;
}

double ChipIndex::fraction(Split split) const {
  if (chips.empty()) return 0.0;
  return static_cast<double>(ids_in(split).size()) /
         static_cast<double>(chips.size());
}

std::vector<Split> default_split_pattern() {
  return {Split::kTrain, Split::kTrain, Split::kTrain, Split::kVal,
          Split::kTest};
}

std::vector<Split> parse_split_pattern(std::string_view pattern) {
  std::vector<Split> out;
  for (char c : pattern) {
    switch (c) {
      case 'T': case 't': out.push_back(Split::kTrain); break;
      case 'V': case 'v': out.push_back(Split::kVal); break;
      case 'E': case 'e': out.push_back(Split::kTest); break;
      case ',': case ' ': break;
      default:
        throw InvalidArgument(std::string("bad split pattern character '") +
                              c + "' (expected T, V or E)");
    }
  }
  return out;
}

ChipIndex build_grid(std::string aoi_name, int rows, int cols,
                     int chip_size_m) {
  if (rows < 1 || cols < 1 || chip_size_m < 1) {
    throw InvalidArgument("grid dimensions must be positive (rows=" +
                          std::to_string(rows) + ", cols=" +
                          std::to_string(cols) + ", chip_size_m=" +
                          std::to_string(chip_size_m) + ")");
  }
  ChipIndex index;
  index.aoi_name = std::move(aoi_name);
  index.chip_size_m = chip_size_m;
  index.rows = rows;
  index.cols = cols;
  index.chips.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      index.chips.push_back(
          {static_cast<ChipId>(r) * cols + c, r, c, Split::kTrain});
    }
  }
  return index;
}

ChipIndex assign_splits(const ChipIndex& index, int band_width_chips,
                        std::span<const Split> pattern, std::uint64_t seed) {
  if (band_width_chips < 1) {
    throw InvalidArgument("band width must be at least one chip");
  }
  if (band_width_chips > index.cols) {
    throw InvalidArgument("band width " + std::to_string(band_width_chips) +
                          " exceeds grid width " + std::to_string(index.cols));
  }
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  for (Split s : pattern) {
    (s == Split::kTrain ? n_train : s == Split::kVal ? n_val : n_test)++;
  }
  if (pattern.empty() || n_val == 0 || n_train != 3 * n_val ||
      n_test != n_val) {
    throw InvalidArgument("split pattern must hold train:val:test as 3:1:1");
  }

  ChipIndex out = index;
  const std::size_t phase = seed % pattern.size();
  for (auto& chip : out.chips) {
    std::size_t band = static_cast<std::size_t>(chip.col / band_width_chips);
    chip.split = pattern[(band + phase) % pattern.size()];
  }
  out.ratio_violation =
      std::abs(out.fraction(Split::kTrain) - 0.6) > 0.05 + 1e-12 ||
      std::abs(out.fraction(Split::kVal) - 0.2) > 0.05 + 1e-12 ||
      std::abs(out.fraction(Split::kTest) - 0.2) > 0.05 + 1e-12;
  return out;
}

nlohmann::json to_json(const ChipIndex& index) {
  nlohmann::json chips = nlohmann::json::array();
  for (const auto& c : index.chips) {
    chips.push_back({{"id", c.id},
                     {"row", c.row},
                     {"col", c.col},
                     {"split", to_string(c.split)}});
  }
  return {{"aoi_name", index.aoi_name},
          {"chip_size_m", index.chip_size_m},
          {"rows", index.rows},
          {"cols", index.cols},
          {"chips", std::move(chips)}};
}

ChipIndex chip_index_from_json(const nlohmann::json& j) {
  try {
    ChipIndex index;
    index.aoi_name = j.at("aoi_name").get<std::string>();
    index.chip_size_m = j.at("chip_size_m").get<int>();
    index.rows = j.at("rows").get<int>();
    index.cols = j.at("cols").get<int>();
    for (const auto& c : j.at("chips")) {
      index.chips.push_back({c.at("id").get<ChipId>(), c.at("row").get<int>(),
                             c.at("col").get<int>(),
                             parse_split(c.at("split").get<std::string>())});
    }
    const auto expected = static_cast<std::size_t>(index.rows) * index.cols;
    if (index.chips.size() != expected) {
      throw FormatError("chip index lists " +
                        std::to_string(index.chips.size()) +
                        " chips, expected rows*cols=" +
                        std::to_string(expected));
    }
    for (std::size_t i = 0; i < index.chips.size(); ++i) {
      if (index.chips[i].id != static_cast<ChipId>(i)) {
        throw FormatError("chip ids must be dense and row-major");
      }
    }
    if (index.rows > 0 && index.cols > 0) {
      auto f = [&](Split s) { return index.fraction(s); };
      index.ratio_violation = std::abs(f(Split::kTrain) - 0.6) > 0.05 ||
                              std::abs(f(Split::kVal) - 0.2) > 0.05 ||
                              std::abs(f(Split::kTest) - 0.2) > 0.05;
    }
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed chip index: ") + e.what());
  }
}

void save_chip_index(const ChipIndex& index, const std::filesystem::path& path) {
  write_json_file(path, to_json(index));
}

ChipIndex load_chip_index(const std::filesystem::path& path) {
  return chip_index_from_json(read_json_file(path));
}

}  // namespace triclip
