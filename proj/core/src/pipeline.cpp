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

#include "triclip/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include "triclip/datastore.hpp"
#include "triclip/errors.hpp"
#include "triclip/grid.hpp"
#include "triclip/json_io.hpp"
#include "triclip/parallel.hpp"
#include "triclip/rng.hpp"

namespace triclip {

namespace fs = std::filesystem;

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& section) {
  if (!j.is_object()) throw InvalidArgument("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw InvalidArgument("unknown key '" + key + "' in config section '" + section + "'");
    }
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument("config key '" + section + "." + key + "' has the wrong type");
  }
}

nlohmann::json sizes_json(const std::vector<int>& sizes) {
  nlohmann::json out = nlohmann::json::array();
  for (int s : sizes) out.push_back(s == kFullSize ? nlohmann::json("full") : nlohmann::json(s));
  return out;
}

std::vector<int> sizes_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_sizes(j.get<std::string>());
  if (!j.is_array()) throw InvalidArgument("ablate.sizes must be a list or a string");
  std::string text;
  for (const auto& v : j) {
    if (!text.empty()) text += ",";
    if (v.is_string()) {
      text += v.get<std::string>();
    } else if (v.is_number_integer()) {
      text += std::to_string(v.get<int>());
    } else {
      throw InvalidArgument("ablate.sizes entries must be integers or \"full\"");
    }
  }
  return parse_sizes(text);
}

}  // namespace

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"seed", "workdir", "gen", "split", "encoder", "train", "embed", "ablate",
                 "project", "plot"},
             "root");
  PipelineConfig c;
  read(j, "seed", c.seed, "root");
  read(j, "workdir", c.workdir, "root");
  if (j.contains("gen")) {
    const auto& g = j["gen"];
    check_keys(g, {"aoi", "rows", "cols", "hw", "noise", "synth"}, "gen");
    read(g, "aoi", c.gen.aoi, "gen");
    read(g, "rows", c.gen.rows, "gen");
    read(g, "cols", c.gen.cols, "gen");
    read(g, "hw", c.gen.hw, "gen");
    read(g, "noise", c.gen.noise, "gen");
    if (g.contains("synth")) {
      const auto& s = g["synth"];
      check_keys(s, {"amplitude", "regional_sd", "local_sd", "sparsity_exponent", "gunw_scale",
                     "channel_dropout"},
                 "gen.synth");
      read(s, "amplitude", c.gen.synth.amplitude, "gen.synth");
      read(s, "regional_sd", c.gen.synth.regional_sd, "gen.synth");
      read(s, "local_sd", c.gen.synth.local_sd, "gen.synth");
      read(s, "sparsity_exponent", c.gen.synth.sparsity_exponent, "gen.synth");
      read(s, "gunw_scale", c.gen.synth.gunw_scale, "gen.synth");
      read(s, "channel_dropout", c.gen.synth.channel_dropout, "gen.synth");
    }
  }
  if (c.gen.rows < 1 || c.gen.cols < 1) throw InvalidArgument("gen.rows and gen.cols must be positive");
  if (c.gen.hw < 8) throw InvalidArgument("gen.hw must be at least 8");
  if (c.gen.noise < 0) throw InvalidArgument("gen.noise must be non-negative");
  if (c.gen.synth.channel_dropout < 0 || c.gen.synth.channel_dropout >= 1) {
    throw InvalidArgument("gen.synth.channel_dropout must lie in [0, 1)");
  }
  if (j.contains("split")) {
    check_keys(j["split"], {"band_width", "pattern"}, "split");
    read(j["split"], "band_width", c.split.band_width, "split");
    read(j["split"], "pattern", c.split.pattern, "split");
  }
  parse_split_pattern(c.split.pattern);
  if (j.contains("encoder")) {
    check_keys(j["encoder"], {"image_hw", "patch", "depth", "width", "heads", "embed_dim", "mlp_ratio"},
               "encoder");
    c.encoder = encoder_config_from_json(j["encoder"]);
  }
  if (c.encoder.image_hw != c.gen.hw) {
    throw InvalidArgument("encoder.image_hw (" + std::to_string(c.encoder.image_hw) +
                          ") must equal gen.hw (" + std::to_string(c.gen.hw) + ")");
  }
  if (j.contains("train")) {
    check_keys(j["train"], {"batch_size", "epochs", "learning_rate", "weight_decay", "seed",
                            "checkpoint_dir", "eval_every", "warmup_fraction", "beta1", "beta2",
                            "adam_eps", "fail_on_missing_modality", "validation_seed"},
               "train");
    c.train = train_config_from_json(j["train"]);
  }
  if (j.contains("embed")) {
    check_keys(j["embed"], {"mode"}, "embed");
    read(j["embed"], "mode", c.embed.mode, "embed");
  }
  parse_embed_mode(c.embed.mode);
  if (j.contains("ablate")) {
    check_keys(j["ablate"], {"sizes", "repeats"}, "ablate");
    if (j["ablate"].contains("sizes")) c.ablate.sizes = sizes_from_json(j["ablate"]["sizes"]);
    read(j["ablate"], "repeats", c.ablate.repeats, "ablate");
  }
  if (c.ablate.repeats < 1) throw InvalidArgument("ablate.repeats must be positive");
  if (j.contains("project")) {
    const auto& p = j["project"];
    check_keys(p, {"modality", "pca_dims", "max_points", "perplexity", "iterations"}, "project");
    read(p, "modality", c.project.modality, "project");
    read(p, "pca_dims", c.project.pca_dims, "project");
    read(p, "max_points", c.project.max_points, "project");
    read(p, "perplexity", c.project.perplexity, "project");
    read(p, "iterations", c.project.iterations, "project");
  }
  parse_probe_modality(c.project.modality);
  if (c.project.max_points < 1 || c.project.max_points > kMaxTsnePoints) {
    throw InvalidArgument("project.max_points must lie in [1, " + std::to_string(kMaxTsnePoints) + "]");
  }
  if (j.contains("plot")) {
    check_keys(j["plot"], {"tasks", "log_scale"}, "plot");
    if (j["plot"].contains("tasks")) {
      std::vector<std::string> names;
      read(j["plot"], "tasks", names, "plot");
      c.plot.tasks.clear();
      for (const auto& n : names) c.plot.tasks.push_back(parse_task(n));
    }
    read(j["plot"], "log_scale", c.plot.log_scale, "plot");
  }
  return c;
}

nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json tasks = nlohmann::json::array();
  for (Task t : c.plot.tasks) tasks.push_back(to_string(t));
  nlohmann::json train = to_json(c.train);
  return {{"seed", c.seed},
          {"workdir", c.workdir},
          {"gen",
           {{"aoi", c.gen.aoi},
            {"rows", c.gen.rows},
            {"cols", c.gen.cols},
            {"hw", c.gen.hw},
            {"noise", c.gen.noise},
            {"synth",
             {{"amplitude", c.gen.synth.amplitude},
              {"regional_sd", c.gen.synth.regional_sd},
              {"local_sd", c.gen.synth.local_sd},
              {"sparsity_exponent", c.gen.synth.sparsity_exponent},
              {"gunw_scale", c.gen.synth.gunw_scale},
              {"channel_dropout", c.gen.synth.channel_dropout}}}}},
          {"split", {{"band_width", c.split.band_width}, {"pattern", c.split.pattern}}},
          {"encoder", to_json(c.encoder)},
          {"train", train},
          {"embed", {{"mode", c.embed.mode}}},
          {"ablate", {{"sizes", sizes_json(c.ablate.sizes)}, {"repeats", c.ablate.repeats}}},
          {"project",
           {{"modality", c.project.modality},
            {"pca_dims", c.project.pca_dims},
            {"max_points", c.project.max_points},
            {"perplexity", c.project.perplexity},
            {"iterations", c.project.iterations}}},
          {"plot", {{"tasks", tasks}, {"log_scale", c.plot.log_scale}}}};
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = read_json_file(path);
  } catch (const FormatError& e) {
    throw InvalidArgument(e.what());
  }
  return pipeline_config_from_json(j);
}

std::uint64_t stage_seed(std::uint64_t master, const std::string& stage) {
  return derive_seed(master, {stream_tag(stage)});
}

// --- stages ---------------------------------------------------------------

void run_gen(const GenConfig& config, std::uint64_t seed, const fs::path& out,
             const SplitConfig& split) {
  const auto pattern = parse_split_pattern(split.pattern);
  ChipIndex index = assign_splits(build_grid(config.aoi, config.rows, config.cols),
                                  split.band_width, pattern, seed);
  ChipStore store = ChipStore::create(out, index);
  std::vector<LabelRow> rows;
  const std::size_t n = index.chips.size();
  constexpr std::size_t kChunk = 64;
  std::vector<SyntheticChip> chunk;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t end = std::min(n, start + kChunk);
    chunk.assign(end - start, {});
    parallel_for(end - start, [&](std::size_t i) {
      chunk[i] = generate_chip(seed, index.chips[start + i].id, config.hw, config.noise,
                               config.synth);
    });
    for (const auto& chip : chunk) {
      for (const auto& m : chip.modalities) store.put(m);
      rows.push_back({chip.chip_id, config.aoi, chip.labels});
    }
  }
  store.save_manifest();
  save_labels(LabelTable(std::move(rows)), out / "labels.json");
}

void run_split(const fs::path& data, const SplitConfig& config, std::uint64_t seed) {
  ChipStore store = ChipStore::open(data);
  const auto pattern = parse_split_pattern(config.pattern);
  ChipIndex index = assign_splits(store.index(), config.band_width, pattern, seed);
  if (index.ratio_violation) {
    std::cerr << "warning: split fractions miss 60/20/20 by more than 5 points (train "
              << index.fraction(Split::kTrain) << ", val " << index.fraction(Split::kVal)
              << ", test " << index.fraction(Split::kTest) << ")\n";
  }
  store.update_index(std::move(index));
}

PretrainResult run_pretrain(const fs::path& data, const EncoderConfig& encoder,
                            TrainConfig train, std::uint64_t seed, const fs::path& out) {
  ChipStore store = ChipStore::open(data);
  PretrainResult result;
  AccessLog log;
  const SplitData train_data = store.load_split(Split::kTrain, &log);
  const SplitData val_data = store.load_split(Split::kVal, &log);
  TowerSet towers = TowerSet::init(encoder, stage_seed(seed, "init"));
  train.seed = stage_seed(seed, "train");
  train.checkpoint_dir = out.string();
  result.history = triclip::train(towers, train_data, val_data, train, &log);
  result.access = log.entries();
  write_history_jsonl(result.history, out / "history.jsonl");

  nlohmann::json counts = nlohmann::json::object();
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) counts[std::string(to_string(s))] = 0;
  for (const auto& [id, split] : result.access) {
    counts[std::string(to_string(split))] = counts[std::string(to_string(split))].get<int>() + 1;
  }
  const auto& best = result.history.evals[result.history.best_eval];
  write_json_file(out / "access.json",
                  {{"reads", counts},
                   {"best_step", best.step},
                   {"best_val_loss", best.val_loss},
                   {"initial_val_loss", result.history.evals.front().val_loss}});
  return result;
}

EmbeddingSet run_embed(const fs::path& data, const fs::path& checkpoint, const EmbedMode& mode,
                       std::uint64_t seed, const fs::path& out, int threads) {
  ChipStore store = ChipStore::open(data);
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const std::uint64_t embed_seed = stage_seed(seed, "embed");
  std::vector<ChipId> ids;
  for (const auto& c : store.index().chips) ids.push_back(c.id);

  EmbeddingSet set(ckpt.towers.config.embed_dim);
  constexpr std::size_t kChunk = 64;
  std::vector<std::array<std::optional<std::vector<float>>, kNumModalities>> slots;
  for (std::size_t start = 0; start < ids.size(); start += kChunk) {
    const std::size_t end = std::min(ids.size(), start + kChunk);
    slots.assign(end - start, {});
    parallel_for(
        end - start,
        [&](std::size_t i) {
          const ChipTriple triple = store.load(ids[start + i]);
          for (Modality m : kModalities) {
            const ModalityChip* chip = triple.get(m);
            if (!chip) continue;
            Rng rng(derive_seed(embed_seed, {static_cast<std::uint64_t>(triple.chip_id),
                                             static_cast<std::uint64_t>(m)}));
            const Vec e = embed_chip(ckpt.towers, *chip, mode, rng);
            slots[i][index_of(m)] = std::vector<float>(e.data(), e.data() + e.size());
          }
        },
        threads);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      for (Modality m : kModalities) {
        if (slots[i][index_of(m)]) set.set(ids[start + i], m, std::move(*slots[i][index_of(m)]));
      }
    }
  }
  save_embeddings(set, store.index(), out);
  return set;
}

AblationReport run_ablate(const fs::path& embeddings, const fs::path& labels,
                          const AblateConfig& config, std::uint64_t seed, const fs::path& out) {
  const EmbeddingSet set = load_embeddings(embeddings);
  const ChipIndex index = load_embedding_index(embeddings);
  const LabelTable table = load_labels(labels);
  AblationOptions options;
  options.sizes = config.sizes;
  options.repeats = config.repeats;
  options.seed = stage_seed(seed, "ablate");
  AblationReport report = run_ablation(set, index, table, options);
  write_json_file(out, to_json(report));
  return report;
}

Projection2D run_project(const fs::path& embeddings, const ProjectConfig& config,
                         std::uint64_t seed, const fs::path& out) {
  const EmbeddingSet set = load_embeddings(embeddings);
  ProjectOptions options;
  options.pca_dims = config.pca_dims;
  options.max_points = config.max_points;
  options.tsne.perplexity = config.perplexity;
  options.tsne.iterations = config.iterations;
  options.tsne.seed = stage_seed(seed, "project");
  Projection2D proj = project_embeddings(set, parse_probe_modality(config.modality), options);
  save_projection(proj, out);
  return proj;
}

void run_plot(const fs::path& projection, const fs::path& labels, Task task, bool log_scale,
              const fs::path& out) {
  const Projection2D proj = load_projection(projection);
  const LabelTable table = load_labels(labels);
  std::vector<double> values;
  values.reserve(proj.chip_ids.size());
  for (ChipId id : proj.chip_ids) values.push_back(table.value(id, task));
  std::string title = proj.modality + " t-SNE, " + std::string(to_string(task));
  if (log_scale) title += " (log scale)";
  emit_scatter(proj, values, log_scale, out, title);
}

void run_report(const fs::path& report, const fs::path& out) {
  const AblationReport r = ablation_report_from_json(read_json_file(report));
  const std::string svg = render_report_svg(r);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + out.string());
  f << svg;
}

// --- runner ---------------------------------------------------------------

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json artifacts = nlohmann::json::array();
  for (const auto& a : m.artifacts) artifacts.push_back({{"path", a.path}, {"sha256", a.sha256}});
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : m.stages) {
    stages.push_back({{"name", s.name},
                      {"status", s.status},
                      {"seconds", s.seconds},
                      {"fingerprint", s.fingerprint}});
  }
  return {{"seed", m.seed},
          {"config_sha256", m.config_sha256},
          {"stage_config_sha256", m.stage_config_sha256},
          {"module_versions", m.module_versions},
          {"artifacts", artifacts},
          {"stages", stages}};
}

std::vector<std::string> pipeline_stages() {
  return {"gen", "split", "pretrain", "embed", "ablate", "project", "plot", "report"};
}

namespace {

struct Layout {
  fs::path root;
  fs::path data() const { return root / "data"; }
  fs::path pretrain() const { return root / "pretrain"; }
  fs::path checkpoint() const { return pretrain() / "best"; }
  fs::path embeddings() const { return root / "embeddings"; }
  fs::path report() const { return root / "ablation" / "report.json"; }
  fs::path projection() const { return root / "projection" / "projection.json"; }
  fs::path figures() const { return root / "figures"; }
  fs::path stamps() const { return root / ".stamps"; }
};

struct Input {
  fs::path path;
  std::string producer;
};

struct Stage {
  std::string name;
  nlohmann::json config;
  std::vector<std::string> upstream;
  std::function<std::vector<Input>()> inputs;
  std::function<std::vector<fs::path>()> outputs;
  std::function<void()> run;
};

std::vector<Input> chip_inputs(const Layout& l, std::initializer_list<Split> splits) {
  std::vector<Input> out = {{l.data() / "grid.json", "split"},
                            {l.data() / "manifest.json", "gen"}};
  if (!fs::exists(l.data() / "grid.json") || !fs::exists(l.data() / "manifest.json")) return out;
  const ChipStore store = ChipStore::open(l.data());
  for (Split s : splits) {
    for (const auto& p : store.files_in(s)) out.push_back({p, "gen"});
  }
  return out;
}

std::string fingerprint(const Stage& stage, std::uint64_t seed,
                        const std::map<std::string, std::string>& done) {
  std::string text = stage.name + "\n" + stage.config.dump() + "\n" + std::to_string(seed) + "\n";
  for (const auto& up : stage.upstream) {
    auto it = done.find(up);
    if (it == done.end()) {
      throw DependencyError(up, "stage '" + stage.name + "' needs stage '" + up +
                                    "' to have run; rerun '" + up + "'");
    }
    text += up + "=" + it->second + "\n";
  }
  for (const auto& in : stage.inputs()) {
    if (!fs::exists(in.path)) {
      throw DependencyError(in.producer, "stage '" + stage.name + "' is missing " +
                                             in.path.string() + "; rerun stage '" +
                                             in.producer + "'");
    }
    text += in.path.filename().string() + "=" + sha256_file(in.path) + "\n";
  }
  return sha256_bytes(text);
}

std::optional<std::string> read_stamp(const Layout& l, const std::string& stage) {
  const fs::path p = l.stamps() / (stage + ".json");
  if (!fs::exists(p)) return std::nullopt;
  try {
    return read_json_file(p).at("fingerprint").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void collect_artifacts(const fs::path& root, const fs::path& dir, std::vector<Artifact>& out) {
  if (!fs::exists(dir)) return;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    out.push_back({fs::relative(f, root).generic_string(), sha256_file(f)});
  }
}

}  // namespace

RunManifest run_pipeline(PipelineConfig config, const RunOptions& options) {
  if (options.seed) config.seed = *options.seed;
  if (options.workdir) config.workdir = *options.workdir;
  const std::uint64_t seed = config.seed;
  const Layout l{config.workdir};
  fs::create_directories(l.stamps());
  const nlohmann::json cj = to_json(config);

  const EmbedMode embed_mode = parse_embed_mode(config.embed.mode);
  std::vector<Stage> stages;
  stages.push_back({"gen", cj["gen"], {}, [] { return std::vector<Input>{}; },
                    [&] {
                      return std::vector<fs::path>{l.data() / "manifest.json",
                                                   l.data() / "labels.json",
                                                   l.data() / "chips"};
                    },
                    [&] { run_gen(config.gen, seed, l.data(), config.split); }});
  stages.push_back({"split", cj["split"], {"gen"},
                    [&] { return std::vector<Input>{{l.data() / "manifest.json", "gen"}}; },
                    [&] { return std::vector<fs::path>{l.data() / "grid.json"}; },
                    [&] { run_split(l.data(), config.split, seed); }});
  stages.push_back({"pretrain", {{"encoder", cj["encoder"]}, {"train", cj["train"]}}, {"split"},
                    [&] { return chip_inputs(l, {Split::kTrain, Split::kVal}); },
                    [&] {
                      return std::vector<fs::path>{l.checkpoint() / "checkpoint.json",
                                                   l.checkpoint() / "params.bin",
                                                   l.pretrain() / "history.jsonl",
                                                   l.pretrain() / "access.json"};
                    },
                    [&] {
                      fs::remove_all(l.pretrain());
                      run_pretrain(l.data(), config.encoder, config.train, seed, l.pretrain());
                    }});
  stages.push_back({"embed", cj["embed"], {"pretrain"},
                    [&] {
                      auto in = chip_inputs(l, {Split::kTrain, Split::kVal, Split::kTest});
                      in.push_back({l.checkpoint() / "checkpoint.json", "pretrain"});
                      in.push_back({l.checkpoint() / "params.bin", "pretrain"});
                      return in;
                    },
                    [&] {
                      return std::vector<fs::path>{l.embeddings() / "embeddings.bin",
                                                   l.embeddings() / "grid.json"};
                    },
                    [&] { run_embed(l.data(), l.checkpoint(), embed_mode, seed, l.embeddings()); }});
  stages.push_back({"ablate", cj["ablate"], {"embed"},
                    [&] {
                      return std::vector<Input>{{l.embeddings() / "embeddings.bin", "embed"},
                                                {l.embeddings() / "grid.json", "embed"},
                                                {l.data() / "labels.json", "gen"}};
                    },
                    [&] { return std::vector<fs::path>{l.report()}; },
                    [&] {
                      run_ablate(l.embeddings(), l.data() / "labels.json", config.ablate, seed,
                                 l.report());
                    }});
  stages.push_back({"project", cj["project"], {"embed"},
                    [&] {
                      return std::vector<Input>{{l.embeddings() / "embeddings.bin", "embed"}};
                    },
                    [&] { return std::vector<fs::path>{l.projection()}; },
                    [&] { run_project(l.embeddings(), config.project, seed, l.projection()); }});
  stages.push_back({"plot", cj["plot"], {"project"},
                    [&] {
                      return std::vector<Input>{{l.projection(), "project"},
                                                {l.data() / "labels.json", "gen"}};
                    },
                    [&] {
                      std::vector<fs::path> out;
                      for (Task t : config.plot.tasks) {
                        out.push_back(l.figures() / ("tsne_" + std::string(to_string(t)) + ".svg"));
                      }
                      return out;
                    },
                    [&] {
                      for (Task t : config.plot.tasks) {
                        run_plot(l.projection(), l.data() / "labels.json", t, config.plot.log_scale,
                                 l.figures() / ("tsne_" + std::string(to_string(t)) + ".svg"));
                      }
                    }});
  stages.push_back({"report", nlohmann::json::object(), {"ablate"},
                    [&] { return std::vector<Input>{{l.report(), "ablate"}}; },
                    [&] { return std::vector<fs::path>{l.figures() / "ablation.svg"}; },
                    [&] { run_report(l.report(), l.figures() / "ablation.svg"); }});

  std::set<std::string> selected;
  for (const auto& s : options.stages) {
    if (std::none_of(stages.begin(), stages.end(), [&](const Stage& st) { return st.name == s; })) {
      throw InvalidArgument("unknown stage '" + s + "'");
    }
    selected.insert(s);
  }

  RunManifest manifest;
  manifest.seed = seed;
  manifest.config_sha256 = sha256_bytes(cj.dump());
  manifest.module_versions = {{"triclip", kVersion},
                              {"grid", "1"},
                              {"synth", "1"},
                              {"datastore", std::to_string(kChipFormatVersion)},
                              {"model", "1"},
                              {"loss", "1"},
                              {"trainer", "1"},
                              {"probe", "1"},
                              {"viz", "1"},
                              {"cli", "1"}};

  std::map<std::string, std::string> done;  // stage -> fingerprint
  for (const auto& stage : stages) {
    manifest.stage_config_sha256[stage.name] = sha256_bytes(stage.config.dump());
    if (!selected.empty() && !selected.count(stage.name)) {
      if (auto stamp = read_stamp(l, stage.name)) done[stage.name] = *stamp;
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const std::string fp = fingerprint(stage, seed, done);
    const auto outputs = stage.outputs();
    const bool present =
        std::all_of(outputs.begin(), outputs.end(), [](const fs::path& p) { return fs::exists(p); });
    StageTiming timing{stage.name, "up-to-date", 0.0, fp};
    if (options.force || !present || read_stamp(l, stage.name) != fp) {
      std::cerr << "[" << stage.name << "] running\n";
      fs::remove(l.stamps() / (stage.name + ".json"));
      stage.run();
      write_json_file(l.stamps() / (stage.name + ".json"), {{"stage", stage.name}, {"fingerprint", fp}});
      timing.status = "ran";
    } else {
      std::cerr << "[" << stage.name << "] up to date\n";
    }
    timing.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest.stages.push_back(timing);
    done[stage.name] = fp;
  }

  for (const fs::path& dir : {l.data(), l.pretrain(), l.embeddings(), l.report().parent_path(),
                              l.projection().parent_path(), l.figures()}) {
    collect_artifacts(l.root, dir, manifest.artifacts);
  }
  write_json_file(l.root / "run_manifest.json", to_json(manifest));
  return manifest;
}

}  // namespace triclip
