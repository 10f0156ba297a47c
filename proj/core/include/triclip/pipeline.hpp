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

// End-to-end stages (gen, split, pretrain, embed, ablate, project, plot,
// report) and the resumable runner that chains them from one JSON config.

#ifndef TRICLIP_PIPELINE_HPP_
#define TRICLIP_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triclip/model.hpp"
#include "triclip/probe.hpp"
#include "triclip/synth.hpp"
#include "triclip/trainer.hpp"
#include "triclip/viz.hpp"

namespace triclip {

inline constexpr const char* kVersion = "0.1.0";

struct GenConfig {
  std::string aoi = "synthetic";
  int rows = 20;
  int cols = 50;
  int hw = 64;
  double noise = 0.05;
  SynthOptions synth;
};

struct SplitConfig {
  int band_width = 2;
  std::string pattern = "TTTVE";
};

struct EmbedConfig {
  std::string mode = "mean";  // random | mean | fixed:K
};

struct AblateConfig {
  std::vector<int> sizes = default_ablation_sizes();
  int repeats = 10;
};

struct ProjectConfig {
  std::string modality = "modsconcat";
  int pca_dims = 50;
  int max_points = kMaxTsnePoints;
  double perplexity = 30.0;
  int iterations = 1000;
};

struct PlotConfig {
  std::vector<Task> tasks{kTasks.begin(), kTasks.end()};
  bool log_scale = true;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string workdir = "triclip_run";
  GenConfig gen;
  SplitConfig split;
  EncoderConfig encoder;
  TrainConfig train;
  EmbedConfig embed;
  AblateConfig ablate;
  ProjectConfig project;
  PlotConfig plot;
};

// Unknown keys are rejected so typos surface as invalid-config errors.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Seeds handed to each stage, all derived from the master seed.
std::uint64_t stage_seed(std::uint64_t master, const std::string& stage);

// --- stages ---------------------------------------------------------------

// Writes grid.json, manifest.json, chips/ and labels.json under `out`.
void run_gen(const GenConfig& config, std::uint64_t seed, const std::filesystem::path& out,
             const SplitConfig& split = {});
// Reassigns splits in an existing data directory.
void run_split(const std::filesystem::path& data, const SplitConfig& config, std::uint64_t seed);

struct PretrainResult {
  TrainHistory history;
  std::vector<std::pair<ChipId, Split>> access;  // every chip read, in order
};
// Trains from data/ into out/ (step_*/, best/, history.jsonl, access.json).
PretrainResult run_pretrain(const std::filesystem::path& data, const EncoderConfig& encoder,
                            TrainConfig train, std::uint64_t seed,
                            const std::filesystem::path& out);
// Embeds every chip of every split with the checkpoint in `checkpoint`.
EmbeddingSet run_embed(const std::filesystem::path& data, const std::filesystem::path& checkpoint,
                       const EmbedMode& mode, std::uint64_t seed,
                       const std::filesystem::path& out, int threads = 0);
AblationReport run_ablate(const std::filesystem::path& embeddings,
                          const std::filesystem::path& labels, const AblateConfig& config,
                          std::uint64_t seed, const std::filesystem::path& out);
Projection2D run_project(const std::filesystem::path& embeddings, const ProjectConfig& config,
                         std::uint64_t seed, const std::filesystem::path& out);
void run_plot(const std::filesystem::path& projection, const std::filesystem::path& labels,
              Task task, bool log_scale, const std::filesystem::path& out);
void run_report(const std::filesystem::path& report, const std::filesystem::path& out);

// --- runner ---------------------------------------------------------------

struct StageTiming {
  std::string name;
  std::string status;  // "ran" | "up-to-date"
  double seconds = 0.0;
  std::string fingerprint;
};

struct Artifact {
  std::string path;  // relative to the workdir
  std::string sha256;
};

struct RunManifest {
  std::uint64_t seed = 0;
  std::string config_sha256;
  std::map<std::string, std::string> stage_config_sha256;
  std::map<std::string, std::string> module_versions;
  std::vector<Artifact> artifacts;
  std::vector<StageTiming> stages;
};

nlohmann::json to_json(const RunManifest& manifest);

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides config.seed
  std::optional<std::string> workdir;
  std::vector<std::string> stages;  // empty: all, in dependency order
  bool force = false;
};

std::vector<std::string> pipeline_stages();

// Runs stages in dependency order, skipping those whose fingerprint
// (stage name, config section, seed, input content hashes) matches the
// stamp under workdir/.stamps and whose outputs exist. Throws
// DependencyError naming the stage to rerun when an input is missing.
// Writes workdir/run_manifest.json.
RunManifest run_pipeline(PipelineConfig config, const RunOptions& options = {});

}  // namespace triclip

#endif  // TRICLIP_PIPELINE_HPP_
