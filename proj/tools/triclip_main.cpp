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

// triclip: command line front end for the synthetic multimodal CLIP
// pipeline. Exit codes: 0 success, 1 other failure, 2 invalid arguments or
// config, 3 data/format/dependency error, 4 numeric failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "triclip/errors.hpp"
#include "triclip/json_io.hpp"
#include "triclip/pipeline.hpp"

namespace fs = std::filesystem;
using namespace triclip;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kInvalid = 2, kData = 3, kNumeric = 4 };

// Accepts {"encoder": {...}, "train": {...}} or one flat object holding
// fields of both.
std::pair<EncoderConfig, TrainConfig> read_pretrain_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = read_json_file(path);
  } catch (const FormatError& e) {
    throw InvalidArgument(e.what());
  }
  if (j.contains("encoder") || j.contains("train")) {
    return {encoder_config_from_json(j.value("encoder", nlohmann::json::object())),
            train_config_from_json(j.value("train", nlohmann::json::object()))};
  }
  static const std::vector<std::string> kEncoderKeys = {
      "image_hw", "patch", "depth", "width", "heads", "embed_dim", "mlp_ratio"};
  nlohmann::json enc = nlohmann::json::object(), train = nlohmann::json::object();
  for (const auto& [key, value] : j.items()) {
    const bool is_enc = std::find(kEncoderKeys.begin(), kEncoderKeys.end(), key) != kEncoderKeys.end();
    (is_enc ? enc : train)[key] = value;
  }
  return {encoder_config_from_json(enc), train_config_from_json(train)};
}

int report_error(const std::exception& e, int code) {
  std::cerr << "triclip: error: " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tri-modal contrastive pretraining and few-shot probing on synthetic chips"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // gen
  GenConfig gen;
  SplitConfig gen_split;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic chips, grid and labels");
  gen_cmd->add_option("--seed", gen_seed, "Master seed");
  gen_cmd->add_option("--rows", gen.rows, "Grid rows")->capture_default_str();
  gen_cmd->add_option("--cols", gen.cols, "Grid columns")->capture_default_str();
  gen_cmd->add_option("--hw", gen.hw, "Chip height and width in pixels")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Per-pixel noise level")->capture_default_str();
  gen_cmd->add_option("--aoi", gen.aoi, "AOI name")->capture_default_str();
  gen_cmd->add_option("--dropout", gen.synth.channel_dropout, "Channel dropout probability");
  gen_cmd->add_option("--band-width", gen_split.band_width, "Split band width in chips")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Output data directory")->required();

  // split
  SplitConfig split;
  std::uint64_t split_seed = 0;
  std::string split_data;
  auto* split_cmd = app.add_subcommand("split", "Reassign train/val/test bands");
  split_cmd->add_option("--data", split_data, "Data directory")->required();
  split_cmd->add_option("--band-width", split.band_width, "Band width in chips")->capture_default_str();
  split_cmd->add_option("--pattern", split.pattern, "Band cycle, e.g. TTTVE")->capture_default_str();
  split_cmd->add_option("--seed", split_seed, "Seed rotating the band phase");

  // pretrain
  std::string pre_data, pre_config, pre_out;
  std::optional<std::uint64_t> pre_seed;
  auto* pre_cmd = app.add_subcommand("pretrain", "Contrastive pretraining of the three towers");
  pre_cmd->add_option("--data", pre_data, "Data directory")->required();
  pre_cmd->add_option("--config", pre_config, "JSON with encoder and train fields")->required();
  pre_cmd->add_option("--out", pre_out, "Checkpoint directory")->required();
  pre_cmd->add_option("--seed", pre_seed, "Master seed (overrides the config seed)");

  // embed
  std::string emb_data, emb_ckpt, emb_out, emb_mode = "mean";
  std::uint64_t emb_seed = 0;
  auto* emb_cmd = app.add_subcommand("embed", "Embed every chip with a checkpoint");
  emb_cmd->add_option("--data", emb_data, "Data directory")->required();
  emb_cmd->add_option("--checkpoint", emb_ckpt, "Checkpoint directory (e.g. CKPT/best)")->required();
  emb_cmd->add_option("--mode", emb_mode, "random | mean | fixed:K")->capture_default_str();
  emb_cmd->add_option("--seed", emb_seed, "Master seed");
  emb_cmd->add_option("--out", emb_out, "Embeddings directory")->required();

  // ablate
  std::string abl_emb, abl_labels, abl_out, abl_sizes = "5,10,100,250,500,1000,5000,20000,full";
  AblateConfig abl;
  std::uint64_t abl_seed = 0;
  auto* abl_cmd = app.add_subcommand("ablate", "Few-shot random-forest ablation");
  abl_cmd->add_option("--embeddings", abl_emb, "Embeddings directory")->required();
  abl_cmd->add_option("--labels", abl_labels, "labels.json")->required();
  abl_cmd->add_option("--sizes", abl_sizes, "Comma-separated sample sizes")->capture_default_str();
  abl_cmd->add_option("--repeats", abl.repeats, "Repeats per cell")->capture_default_str();
  abl_cmd->add_option("--seed", abl_seed, "Master seed");
  abl_cmd->add_option("--out", abl_out, "report.json")->required();

  // project
  std::string prj_emb, prj_out;
  ProjectConfig prj;
  std::uint64_t prj_seed = 0;
  auto* prj_cmd = app.add_subcommand("project", "PCA + t-SNE 2-D projection");
  prj_cmd->add_option("--embeddings", prj_emb, "Embeddings directory")->required();
  prj_cmd->add_option("--modality", prj.modality, "s1grdm | s2rgbm | gunw | modsconcat")
      ->capture_default_str();
  prj_cmd->add_option("--perplexity", prj.perplexity, "t-SNE perplexity")->capture_default_str();
  prj_cmd->add_option("--iterations", prj.iterations, "t-SNE iterations")->capture_default_str();
  prj_cmd->add_option("--pca-dims", prj.pca_dims, "PCA dimensions before t-SNE")->capture_default_str();
  prj_cmd->add_option("--seed", prj_seed, "Master seed");
  prj_cmd->add_option("--out", prj_out, "proj.json")->required();

  // plot
  std::string plt_proj, plt_labels, plt_task, plt_out;
  bool plt_log = false;
  auto* plt_cmd = app.add_subcommand("plot", "Label-coloured scatter of a projection");
  plt_cmd->add_option("--proj", plt_proj, "proj.json")->required();
  plt_cmd->add_option("--labels", plt_labels, "labels.json")->required();
  plt_cmd->add_option("--task", plt_task, "modisveg | ghsbuilts | esawc-crops | esawc-pwater")
      ->required();
  plt_cmd->add_flag("--log", plt_log, "log1p colour scale");
  plt_cmd->add_option("--out", plt_out, "Output SVG")->required();

  // report
  std::string rep_in, rep_out;
  auto* rep_cmd = app.add_subcommand("report", "Accuracy-vs-sample-size SVG from report.json");
  rep_cmd->add_option("--report", rep_in, "report.json")->required();
  rep_cmd->add_option("--out", rep_out, "Output SVG")->required();

  // run
  std::string run_config, run_workdir, run_stages;
  std::optional<std::uint64_t> run_seed;
  bool run_force = false;
  auto* run_cmd = app.add_subcommand("run", "Run the whole pipeline from one JSON config");
  run_cmd->add_option("--config", run_config, "Pipeline config JSON")->required();
  run_cmd->add_option("--seed", run_seed, "Master seed (overrides the config seed)");
  run_cmd->add_option("--workdir", run_workdir, "Working directory (overrides the config)");
  run_cmd->add_option("--stages", run_stages, "Comma-separated subset of stages");
  run_cmd->add_flag("--force", run_force, "Rerun stages even when up to date");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*gen_cmd) {
      run_gen(gen, gen_seed, gen_out, gen_split);
      std::cout << "wrote " << gen.rows * gen.cols << " chips to " << gen_out << "\n";
    } else if (*split_cmd) {
      run_split(split_data, split, split_seed);
    } else if (*pre_cmd) {
      auto [encoder, train] = read_pretrain_config(pre_config);
      const std::uint64_t seed = pre_seed.value_or(train.seed);
      const auto result = run_pretrain(pre_data, encoder, train, seed, pre_out);
      const auto& best = result.history.evals[result.history.best_eval];
      std::cout << "best checkpoint: step " << best.step << ", val loss " << best.val_loss
                << " (initial " << result.history.evals.front().val_loss << ")\n";
    } else if (*emb_cmd) {
      const auto set = run_embed(emb_data, emb_ckpt, parse_embed_mode(emb_mode), emb_seed, emb_out);
      std::cout << "embedded " << set.size() << " chips\n";
    } else if (*abl_cmd) {
      abl.sizes = parse_sizes(abl_sizes);
      const auto report = run_ablate(abl_emb, abl_labels, abl, abl_seed, abl_out);
      for (Task t : kTasks) {
        const auto s = min_shots_for_95(report, t, ProbeModality::kModsconcat);
        std::cout << to_string(t) << " modsconcat 95% size: "
                  << (s ? std::to_string(*s) : std::string("none")) << "\n";
      }
    } else if (*prj_cmd) {
      const auto p = run_project(prj_emb, prj, prj_seed, prj_out);
      std::cout << "projected " << p.points.size() << " chips, final KL " << p.final_kl << "\n";
    } else if (*plt_cmd) {
      run_plot(plt_proj, plt_labels, parse_task(plt_task), plt_log, plt_out);
    } else if (*rep_cmd) {
      run_report(rep_in, rep_out);
    } else if (*run_cmd) {
      RunOptions opts;
      opts.seed = run_seed;
      if (!run_workdir.empty()) opts.workdir = run_workdir;
      opts.force = run_force;
      std::string rest = run_stages;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        opts.stages.push_back(rest.substr(0, comma));
        rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
      }
      const auto manifest = run_pipeline(load_pipeline_config(run_config), opts);
      for (const auto& s : manifest.stages) {
        std::cout << s.name << ": " << s.status << " (" << s.seconds << " s)\n";
      }
    }
  } catch (const InvalidArgument& e) {
    return report_error(e, kInvalid);
  } catch (const NumericError& e) {
    return report_error(e, kNumeric);
  } catch (const DependencyError& e) {
    std::cerr << "triclip: error: " << e.what() << " (stage: " << e.stage() << ")\n";
    return kData;
  } catch (const FormatError& e) {
    return report_error(e, kData);
  } catch (const IoError& e) {
    return report_error(e, kData);
  } catch (const ValidationError& e) {
    return report_error(e, kData);
  } catch (const MissingDataError& e) {
    return report_error(e, kData);
  } catch (const DegenerateDistributionError& e) {
    return report_error(e, kData);
  } catch (const std::exception& e) {
    return report_error(e, kOther);
  }
  return kOk;
}
