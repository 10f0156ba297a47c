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

#include "triclip/types.hpp"

#include <algorithm>

#include "triclip/errors.hpp"

namespace triclip {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kS1grdm: return "s1grdm";
    case Modality::kS2rgbm: return "s2rgbm";
    case Modality::kGunw: return "gunw";
  }
  return "?";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::kModisVeg: return "modisveg";
    case Task::kGhsBuilts: return "ghsbuilts";
    case Task::kEsawcCrops: return "esawc-crops";
    case Task::kEsawcPwater: return "esawc-pwater";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  for (Modality m : kModalities) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown modality '" + std::string(name) + "'");
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument("unknown split '" + std::string(name) + "'");
}

Task parse_task(std::string_view name) {
  for (Task t : kTasks) {
    if (to_string(t) == name) return t;
  }
  throw InvalidArgument("unknown task '" + std::string(name) + "'");
}

int ModalityChip::available_channels() const {
  return static_cast<int>(
      std::count_if(channel_mask.begin(), channel_mask.end(),
                    [](std::uint8_t v) { return v != 0; }));
}

}  // namespace triclip
