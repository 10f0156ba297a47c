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

// Downstream probing: balanced binary labels, random-forest probes on frozen
// embeddings and the few-shot sample-size ablation.

#ifndef TRICLIP_PROBE_HPP_
#define TRICLIP_PROBE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triclip/datastore.hpp"
#include "triclip/grid.hpp"
#include "triclip/random_forest.hpp"
#include "triclip/types.hpp"

namespace triclip {

struct ThresholdResult {
  double threshold = 0.0;
  std::vector<std::uint8_t> labels;
};

// Median threshold; values above it are 1, below it 0. Values equal to the
// median are handed out as 0 in ascending chip-id order (input order when
// `ids` is empty) until the zero class holds ceil(N/2), the rest become 1.
// Throws InvalidArgument for N < 2 and DegenerateDistributionError when
// every value is identical.
ThresholdResult balance_threshold(std::span<const double> values,
                                  std::span<const ChipId> ids = {});

struct LabelRow {
  ChipId chip_id = 0;
  std::string aoi;
  std::array<double, 4> values{};  // raw per-task means, indexed by Task
};

class LabelTable {
 public:
  LabelTable() = default;
  // Computes per-AOI, per-task thresholds and balanced labels.
  explicit LabelTable(std::vector<LabelRow> rows);

  const std::vector<LabelRow>& rows() const { return rows_; }
  double threshold(const std::string& aoi, Task task) const;
  // Throws MissingDataError for an unknown chip.
  std::uint8_t label(ChipId id, Task task) const;
  double value(ChipId id, Task task) const;
  bool has(ChipId id) const { return index_.count(id) != 0; }
  const std::string& aoi_of(ChipId id) const;
  std::vector<std::string> aois() const;

 private:
  const LabelRow& row(ChipId id) const;

  std::vector<LabelRow> rows_;
  std::map<ChipId, std::size_t> index_;
  std::map<std::string, std::array<double, 4>> thresholds_;
  std::vector<std::array<std::uint8_t, 4>> labels_;
};

nlohmann::json to_json(const LabelTable& table);
LabelTable label_table_from_json(const nlohmann::json& j);
void save_labels(const LabelTable& table, const std::filesystem::path& path);
LabelTable load_labels(const std::filesystem::path& path);

enum class ProbeModality : std::uint8_t { kS1grdm = 0, kS2rgbm = 1, kGunw = 2, kModsconcat = 3 };
inline constexpr std::array<ProbeModality, 4> kProbeModalities = {
    ProbeModality::kS1grdm, ProbeModality::kS2rgbm, ProbeModality::kGunw,
    ProbeModality::kModsconcat};

std::string_view to_string(ProbeModality m);
ProbeModality parse_probe_modality(std::string_view name);

// Marks the full training split in a list of sample sizes.
inline constexpr int kFullSize = -1;

std::vector<int> default_ablation_sizes();
// "5,10,full" -> {5, 10, kFullSize}; must be ascending with full last.
std::vector<int> parse_sizes(std::string_view text);
std::string size_label(int size);

struct AblationCell {
  std::string aoi;
  Task task = Task::kModisVeg;
  ProbeModality modality = ProbeModality::kS1grdm;
  int size = 0;            // requested size, kFullSize for full
  int effective_size = 0;  // chips actually sampled
  std::vector<double> accuracies;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over repeats
};

struct AblationReport {
  std::uint64_t seed = 0;
  int repeats = 0;
  std::vector<int> sizes;
  std::size_t train_chips = 0;
  std::size_t test_chips = 0;
  // Ordered by aoi, task, modality, size.
  std::vector<AblationCell> cells;

  const AblationCell* find(const std::string& aoi, Task task, ProbeModality modality,
                           int size) const;
  std::vector<std::string> aois() const;
};

struct AblationOptions {
  std::vector<int> sizes = default_ablation_sizes();
  int repeats = 10;
  std::uint64_t seed = 0;
  ForestOptions forest;
  std::vector<Task> tasks{kTasks.begin(), kTasks.end()};
  std::vector<ProbeModality> modalities{kProbeModalities.begin(), kProbeModalities.end()};
  int threads = 0;
};

// Feature matrix for the given chips; rows in `ids` order.
Mat probe_features(const EmbeddingSet& embeddings, std::span<const ChipId> ids,
                   ProbeModality modality);

// For each (task, modality, size, repeat): samples `size` training chips
// without replacement, fits a forest and scores it on the whole test split.
// Sizes above the training split are clamped to full with a warning; cells
// with the same effective size share one computation. A sample holding a
// single class yields a constant predictor of that class.
AblationReport run_ablation(const EmbeddingSet& embeddings, const ChipIndex& index,
                            const LabelTable& labels, const AblationOptions& options);

// Smallest non-full size whose mean accuracy reaches 95% of the full-data
// mean accuracy; nullopt when none does. An empty `aoi` selects the only
// AOI of the report.
std::optional<int> min_shots_for_95(const AblationReport& report, Task task,
                                    ProbeModality modality, const std::string& aoi = {});

nlohmann::json to_json(const AblationReport& report);
AblationReport ablation_report_from_json(const nlohmann::json& j);

// Accuracy against sample size, one panel per task and one line per
// modality; sizes sit at even spacing and the 95% size is marked.
std::string render_report_svg(const AblationReport& report, const std::string& aoi = {});

}  // namespace triclip

#endif  // TRICLIP_PROBE_HPP_
