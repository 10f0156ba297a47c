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

#include "triclip/probe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "triclip/errors.hpp"
#include "triclip/json_io.hpp"
#include "triclip/parallel.hpp"
#include "triclip/rng.hpp"

namespace triclip {

ThresholdResult balance_threshold(std::span<const double> values,
                                  std::span<const ChipId> ids) {
  const std::size_t n = values.size();
  if (n < 2) throw InvalidArgument("balance_threshold needs at least two values");
  if (!ids.empty() && ids.size() != n) {
    throw InvalidArgument("balance_threshold: ids and values differ in length");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("balance_threshold: non-finite value");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    throw DegenerateDistributionError("all " + std::to_string(n) +
                                      " values are identical; no balanced split exists");
  }
  const double median = n % 2 == 1 ? sorted[n / 2]
                                   : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  ThresholdResult out;
  out.threshold = median;
  out.labels.assign(n, 0);
  std::size_t zeros = 0;
  std::vector<std::size_t> ties;
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i] > median) {
      out.labels[i] = 1;
    } else if (values[i] < median) {
      ++zeros;
    } else {
      ties.push_back(i);
    }
  }
  std::stable_sort(ties.begin(), ties.end(), [&](std::size_t a, std::size_t b) {
    return ids.empty() ? a < b : ids[a] < ids[b];
  });
  const std::size_t want_zeros = (n + 1) / 2;
  for (std::size_t t : ties) {
    if (zeros < want_zeros) {
      ++zeros;
    } else {
      out.labels[t] = 1;
    }
  }
  return out;
}

LabelTable::LabelTable(std::vector<LabelRow> rows) : rows_(std::move(rows)) {
  std::map<std::string, std::vector<std::size_t>> by_aoi;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (!index_.emplace(rows_[i].chip_id, i).second) {
      throw InvalidArgument("duplicate chip " + std::to_string(rows_[i].chip_id) +
                            " in label table");
    }
    by_aoi[rows_[i].aoi].push_back(i);
  }
  labels_.assign(rows_.size(), {});
  for (const auto& [aoi, members] : by_aoi) {
    std::vector<ChipId> ids;
    for (std::size_t i : members) ids.push_back(rows_[i].chip_id);
    for (Task task : kTasks) {
      const int t = index_of(task);
      std::vector<double> values;
      for (std::size_t i : members) values.push_back(rows_[i].values[t]);
      ThresholdResult r;
      try {
        r = balance_threshold(values, ids);
      } catch (const DegenerateDistributionError& e) {
        throw DegenerateDistributionError("task " + std::string(to_string(task)) + " in AOI " +
                                          aoi + ": " + e.what());
      }
      thresholds_[aoi][t] = r.threshold;
      for (std::size_t k = 0; k < members.size(); ++k) labels_[members[k]][t] = r.labels[k];
    }
  }
}

const LabelRow& LabelTable::row(ChipId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw MissingDataError("no labels for chip " + std::to_string(id));
  }
  return rows_[it->second];
}

double LabelTable::threshold(const std::string& aoi, Task task) const {
  auto it = thresholds_.find(aoi);
  if (it == thresholds_.end()) throw MissingDataError("no labels for AOI " + aoi);
  return it->second[index_of(task)];
}

std::uint8_t LabelTable::label(ChipId id, Task task) const {
  row(id);
  return labels_[index_.at(id)][index_of(task)];
}

double LabelTable::value(ChipId id, Task task) const { return row(id).values[index_of(task)]; }

const std::string& LabelTable::aoi_of(ChipId id) const { return row(id).aoi; }

std::vector<std::string> LabelTable::aois() const {
  std::vector<std::string> out;
  for (const auto& [aoi, t] : thresholds_) out.push_back(aoi);
  return out;
}

nlohmann::json to_json(const LabelTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows()) {
    nlohmann::json values, labels;
    for (Task t : kTasks) {
      values[std::string(to_string(t))] = r.values[index_of(t)];
      labels[std::string(to_string(t))] = table.label(r.chip_id, t);
    }
    rows.push_back({{"chip_id", r.chip_id}, {"aoi", r.aoi}, {"values", values}, {"labels", labels}});
  }
  nlohmann::json thresholds = nlohmann::json::object();
  for (const auto& aoi : table.aois()) {
    for (Task t : kTasks) thresholds[aoi][std::string(to_string(t))] = table.threshold(aoi, t);
  }
  return {{"thresholds", thresholds}, {"rows", rows}};
}

LabelTable label_table_from_json(const nlohmann::json& j) {
  std::vector<LabelRow> rows;
  try {
    for (const auto& r : j.at("rows")) {
      LabelRow row;
      row.chip_id = r.at("chip_id").get<ChipId>();
      row.aoi = r.at("aoi").get<std::string>();
      for (Task t : kTasks) {
        row.values[index_of(t)] = r.at("values").at(std::string(to_string(t))).get<double>();
      }
      rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed label table: ") + e.what());
  }
  return LabelTable(std::move(rows));
}

void save_labels(const LabelTable& table, const std::filesystem::path& path) {
  write_json_file(path, to_json(table));
}

LabelTable load_labels(const std::filesystem::path& path) {
  return label_table_from_json(read_json_file(path));
}

std::string_view to_string(ProbeModality m) {
  switch (m) {
    case ProbeModality::kS1grdm: return "s1grdm";
    case ProbeModality::kS2rgbm: return "s2rgbm";
    case ProbeModality::kGunw: return "gunw";
    case ProbeModality::kModsconcat: return "modsconcat";
  }
  return "?";
}

ProbeModality parse_probe_modality(std::string_view name) {
  for (ProbeModality m : kProbeModalities) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown probe modality '" + std::string(name) + "'");
}

std::vector<int> default_ablation_sizes() {
  return {5, 10, 100, 250, 500, 1000, 5000, 20000, kFullSize};
}

std::vector<int> parse_sizes(std::string_view text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string_view tok = text.substr(pos, comma - pos);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (tok == "full") {
      out.push_back(kFullSize);
    } else {
      int v = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size() || v < 1) {
        throw InvalidArgument("bad sample size '" + std::string(tok) + "'");
      }
      out.push_back(v);
    }
    pos = comma + 1;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == kFullSize && i + 1 != out.size()) {
      throw InvalidArgument("'full' must be the last sample size");
    }
    if (i > 0 && out[i] != kFullSize && out[i] <= out[i - 1]) {
      throw InvalidArgument("sample sizes must be strictly ascending");
    }
  }
  return out;
}

std::string size_label(int size) { return size == kFullSize ? "full" : std::to_string(size); }

const AblationCell* AblationReport::find(const std::string& aoi, Task task,
                                         ProbeModality modality, int size) const {
  for (const auto& c : cells) {
    if (c.aoi == aoi && c.task == task && c.modality == modality && c.size == size) return &c;
  }
  return nullptr;
}

std::vector<std::string> AblationReport::aois() const {
  std::vector<std::string> out;
  for (const auto& c : cells) {
    if (std::find(out.begin(), out.end(), c.aoi) == out.end()) out.push_back(c.aoi);
  }
  return out;
}

Mat probe_features(const EmbeddingSet& embeddings, std::span<const ChipId> ids,
                   ProbeModality modality) {
  const int d = embeddings.dim();
  const int width = modality == ProbeModality::kModsconcat ? kNumModalities * d : d;
  Mat X(static_cast<Eigen::Index>(ids.size()), width);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<float> v;
    if (modality == ProbeModality::kModsconcat) {
      v = concat_embeddings(embeddings, ids[i]);
    } else {
      const auto m = static_cast<Modality>(static_cast<int>(modality));
      const auto* e = embeddings.get(ids[i], m);
      if (!e) {
        throw MissingDataError("chip " + std::to_string(ids[i]) + " has no " +
                               std::string(to_string(m)) + " embedding");
      }
      v = *e;
    }
    for (int k = 0; k < width; ++k) X(static_cast<Eigen::Index>(i), k) = v[k];
  }
  return X;
}

namespace {

struct Job {
  std::size_t task_slot, modality_slot;
  int effective;
  int repeat;
};

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

AblationReport run_ablation(const EmbeddingSet& embeddings, const ChipIndex& index,
                            const LabelTable& labels, const AblationOptions& options) {
  if (options.repeats < 1) throw InvalidArgument("repeats must be positive");
  if (options.sizes.empty()) throw InvalidArgument("no sample sizes given");
  const std::vector<ChipId> train_ids = index.ids_in(Split::kTrain);
  const std::vector<ChipId> test_ids = index.ids_in(Split::kTest);
  if (train_ids.empty() || test_ids.empty()) {
    throw InvalidArgument("ablation needs non-empty train and test splits");
  }
  const int n_train = static_cast<int>(train_ids.size());

  std::vector<int> effective(options.sizes.size());
  for (std::size_t i = 0; i < options.sizes.size(); ++i) {
    const int s = options.sizes[i];
    if (s != kFullSize && s > n_train) {
      std::cerr << "warning: sample size " << s << " exceeds the " << n_train
                << " training chips; using the full split\n";
    }
    effective[i] = (s == kFullSize || s > n_train) ? n_train : s;
  }
  std::vector<int> unique_eff = effective;
  std::sort(unique_eff.begin(), unique_eff.end());
  unique_eff.erase(std::unique(unique_eff.begin(), unique_eff.end()), unique_eff.end());

  std::vector<Mat> x_train, x_test;
  for (ProbeModality m : options.modalities) {
    x_train.push_back(probe_features(embeddings, train_ids, m));
    x_test.push_back(probe_features(embeddings, test_ids, m));
  }
  std::vector<std::vector<std::uint8_t>> y_train, y_test;
  for (Task t : options.tasks) {
    auto& ytr = y_train.emplace_back();
    auto& yte = y_test.emplace_back();
    for (ChipId id : train_ids) ytr.push_back(labels.label(id, t));
    for (ChipId id : test_ids) yte.push_back(labels.label(id, t));
  }

  std::vector<Job> jobs;
  for (std::size_t t = 0; t < options.tasks.size(); ++t) {
    for (std::size_t m = 0; m < options.modalities.size(); ++m) {
      for (int eff : unique_eff) {
        for (int r = 0; r < options.repeats; ++r) jobs.push_back({t, m, eff, r});
      }
    }
  }
  const std::uint64_t aoi_tag = stream_tag(index.aoi_name);
  std::vector<double> accuracy(jobs.size());
  parallel_for(
      jobs.size(),
      [&](std::size_t j) {
        const Job& job = jobs[j];
        const std::uint64_t cell_seed = derive_seed(
            options.seed,
            {aoi_tag, static_cast<std::uint64_t>(index_of(options.tasks[job.task_slot])),
             static_cast<std::uint64_t>(options.modalities[job.modality_slot]),
             static_cast<std::uint64_t>(job.effective), static_cast<std::uint64_t>(job.repeat)});
        const Mat& xtr = x_train[job.modality_slot];
        const auto& ytr = y_train[job.task_slot];

        std::vector<int> pick(n_train);
        std::iota(pick.begin(), pick.end(), 0);
        if (job.effective < n_train) {
          Rng rng(derive_seed(cell_seed, {stream_tag("subset")}));
          for (int i = 0; i < job.effective; ++i) {
            const int k = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_train - i)));
            std::swap(pick[i], pick[k]);
          }
          pick.resize(job.effective);
        }
        Mat xs(static_cast<Eigen::Index>(pick.size()), xtr.cols());
        std::vector<std::uint8_t> ys(pick.size());
        std::size_t ones = 0;
        for (std::size_t i = 0; i < pick.size(); ++i) {
          xs.row(static_cast<Eigen::Index>(i)) = xtr.row(pick[i]);
          ys[i] = ytr[pick[i]];
          ones += ys[i];
        }

        const auto& yte = y_test[job.task_slot];
        std::vector<std::uint8_t> pred;
        if (ones == 0 || ones == ys.size()) {
          pred.assign(yte.size(), ones == 0 ? 0 : 1);
        } else {
          const auto model = rf_fit(xs, ys, derive_seed(cell_seed, {stream_tag("forest")}),
                                    options.forest);
          pred = rf_predict(model, x_test[job.modality_slot]);
        }
        std::size_t correct = 0;
        for (std::size_t i = 0; i < yte.size(); ++i) correct += pred[i] == yte[i];
        accuracy[j] = static_cast<double>(correct) / static_cast<double>(yte.size());
      },
      options.threads);

  std::map<std::tuple<std::size_t, std::size_t, int>, std::vector<double>> by_cell;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    by_cell[{jobs[j].task_slot, jobs[j].modality_slot, jobs[j].effective}].push_back(accuracy[j]);
  }

  AblationReport report;
  report.seed = options.seed;
  report.repeats = options.repeats;
  report.sizes = options.sizes;
  report.train_chips = train_ids.size();
  report.test_chips = test_ids.size();
  for (std::size_t t = 0; t < options.tasks.size(); ++t) {
    for (std::size_t m = 0; m < options.modalities.size(); ++m) {
      for (std::size_t s = 0; s < options.sizes.size(); ++s) {
        AblationCell cell;
        cell.aoi = index.aoi_name;
        cell.task = options.tasks[t];
        cell.modality = options.modalities[m];
        cell.size = options.sizes[s];
        cell.effective_size = effective[s];
        cell.accuracies = by_cell.at({t, m, effective[s]});
        cell.mean = mean_of(cell.accuracies);
        cell.std = population_std(cell.accuracies, cell.mean);
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

std::optional<int> min_shots_for_95(const AblationReport& report, Task task,
                                    ProbeModality modality, const std::string& aoi) {
  std::string which = aoi;
  if (which.empty()) {
    const auto aois = report.aois();
    if (aois.size() != 1) {
      throw InvalidArgument("report covers " + std::to_string(aois.size()) +
                            " AOIs; name one");
    }
    which = aois.front();
  }
  const AblationCell* full = report.find(which, task, modality, kFullSize);
  if (!full) {
    throw InvalidArgument("report has no full-dataset row for " +
                          std::string(to_string(task)) + "/" + std::string(to_string(modality)));
  }
  const double target = 0.95 * full->mean;
  std::vector<int> sizes;
  for (int s : report.sizes) {
    if (s != kFullSize) sizes.push_back(s);
  }
  std::sort(sizes.begin(), sizes.end());
  for (int s : sizes) {
    const AblationCell* c = report.find(which, task, modality, s);
    if (c && c->mean >= target) return s;
  }
  return std::nullopt;
}

namespace {

nlohmann::json size_json(int s) {
  return s == kFullSize ? nlohmann::json("full") : nlohmann::json(s);
}

int size_from_json(const nlohmann::json& j) {
  if (j.is_string() && j.get<std::string>() == "full") return kFullSize;
  return j.get<int>();
}

}  // namespace

nlohmann::json to_json(const AblationReport& report) {
  nlohmann::json sizes = nlohmann::json::array();
  for (int s : report.sizes) sizes.push_back(size_json(s));
  nlohmann::json cells = nlohmann::json::array();
  std::set<std::tuple<std::string, int, int>> groups;
  for (const auto& c : report.cells) {
    cells.push_back({{"aoi", c.aoi},
                     {"task", to_string(c.task)},
                     {"modality", to_string(c.modality)},
                     {"size", size_json(c.size)},
                     {"effective_size", c.effective_size},
                     {"mean", c.mean},
                     {"std", c.std},
                     {"accuracies", c.accuracies}});
    groups.insert({c.aoi, index_of(c.task), static_cast<int>(c.modality)});
  }
  nlohmann::json shots = nlohmann::json::array();
  for (const auto& [aoi, t, m] : groups) {
    const auto task = static_cast<Task>(t);
    const auto mod = static_cast<ProbeModality>(m);
    if (!report.find(aoi, task, mod, kFullSize)) continue;
    const auto s = min_shots_for_95(report, task, mod, aoi);
    shots.push_back({{"aoi", aoi},
                     {"task", to_string(task)},
                     {"modality", to_string(mod)},
                     {"full_accuracy", report.find(aoi, task, mod, kFullSize)->mean},
                     {"size", s ? nlohmann::json(*s) : nlohmann::json(nullptr)}});
  }
  return {{"seed", report.seed},
          {"repeats", report.repeats},
          {"sizes", sizes},
          {"train_chips", report.train_chips},
          {"test_chips", report.test_chips},
          {"cells", cells},
          {"min_shots_for_95", shots}};
}

AblationReport ablation_report_from_json(const nlohmann::json& j) {
  AblationReport r;
  try {
    r.seed = j.at("seed").get<std::uint64_t>();
    r.repeats = j.at("repeats").get<int>();
    for (const auto& s : j.at("sizes")) r.sizes.push_back(size_from_json(s));
    r.train_chips = j.value("train_chips", std::size_t{0});
    r.test_chips = j.value("test_chips", std::size_t{0});
    for (const auto& c : j.at("cells")) {
      AblationCell cell;
      cell.aoi = c.at("aoi").get<std::string>();
      cell.task = parse_task(c.at("task").get<std::string>());
      cell.modality = parse_probe_modality(c.at("modality").get<std::string>());
      cell.size = size_from_json(c.at("size"));
      cell.effective_size = c.at("effective_size").get<int>();
      cell.mean = c.at("mean").get<double>();
      cell.std = c.at("std").get<double>();
      cell.accuracies = c.at("accuracies").get<std::vector<double>>();
      r.cells.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed ablation report: ") + e.what());
  }
  return r;
}

std::string render_report_svg(const AblationReport& report, const std::string& aoi) {
  std::string which = aoi;
  if (which.empty()) {
    const auto aois = report.aois();
    if (aois.empty()) throw InvalidArgument("empty ablation report");
    which = aois.front();
  }
  std::vector<Task> tasks;
  for (const auto& c : report.cells) {
    if (c.aoi == which && std::find(tasks.begin(), tasks.end(), c.task) == tasks.end()) {
      tasks.push_back(c.task);
    }
  }
  double lo = 1.0;
  for (const auto& c : report.cells) {
    if (c.aoi == which) lo = std::min(lo, c.mean - c.std);
  }
  lo = std::max(0.0, std::floor(lo * 10.0) / 10.0);
  if (lo >= 1.0) lo = 0.9;

  constexpr double kPanelW = 300, kPanelH = 240, kLeft = 50, kTop = 40, kPlotW = 230,
                   kPlotH = 160;
  static const std::array<const char*, 4> kColors = {"#1f77b4", "#2ca02c", "#d62728",
                                                      "#111111"};
  const std::size_t n_sizes = report.sizes.size();
  auto x_of = [&](std::size_t i) {
    return kLeft + (n_sizes > 1 ? kPlotW * static_cast<double>(i) / (n_sizes - 1) : kPlotW / 2);
  };
  auto y_of = [&](double acc) { return kTop + kPlotH * (1.0 - (acc - lo) / (1.0 - lo)); };

  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  const double width = kPanelW * std::max<std::size_t>(1, tasks.size());
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << kPanelH + 30 << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < tasks.size(); ++p) {
    svg << "<g transform=\"translate(" << kPanelW * static_cast<double>(p) << ",0)\">\n";
    svg << "<text x=\"" << kLeft + kPlotW / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        << "font-size=\"12\">" << to_string(tasks[p]) << "</text>\n";
    svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlotW
        << "\" height=\"" << kPlotH << "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double acc = lo + (1.0 - lo) * k / 4.0;
      svg << "<text x=\"" << kLeft - 4 << "\" y=\"" << y_of(acc) + 3
          << "\" text-anchor=\"end\">" << acc << "</text>\n";
    }
    for (std::size_t i = 0; i < n_sizes; ++i) {
      svg << "<text x=\"" << x_of(i) << "\" y=\"" << kTop + kPlotH + 14
          << "\" text-anchor=\"middle\">" << size_label(report.sizes[i]) << "</text>\n";
    }
    for (std::size_t m = 0; m < kProbeModalities.size(); ++m) {
      const ProbeModality mod = kProbeModalities[m];
      std::ostringstream pts;
      pts.setf(std::ios::fixed);
      pts.precision(2);
      bool any = false;
      for (std::size_t i = 0; i < n_sizes; ++i) {
        const AblationCell* c = report.find(which, tasks[p], mod, report.sizes[i]);
        if (!c) continue;
        pts << x_of(i) << "," << y_of(c->mean) << " ";
        any = true;
      }
      if (!any) continue;
      svg << "<polyline fill=\"none\" stroke=\"" << kColors[m] << "\" stroke-width=\"1.5\" "
          << "points=\"" << pts.str() << "\"/>\n";
      if (!report.find(which, tasks[p], mod, kFullSize)) continue;
      if (auto s = min_shots_for_95(report, tasks[p], mod, which)) {
        const auto it = std::find(report.sizes.begin(), report.sizes.end(), *s);
        const auto i = static_cast<std::size_t>(it - report.sizes.begin());
        const AblationCell* c = report.find(which, tasks[p], mod, *s);
        svg << "<circle cx=\"" << x_of(i) << "\" cy=\"" << y_of(c->mean) << "\" r=\"4\" fill=\""
            << kColors[m] << "\"/>\n";
      }
    }
    svg << "</g>\n";
  }
  for (std::size_t m = 0; m < kProbeModalities.size(); ++m) {
    const double x = 10 + 110.0 * static_cast<double>(m);
    svg << "<line x1=\"" << x << "\" y1=\"" << kPanelH + 15 << "\" x2=\"" << x + 20
        << "\" y2=\"" << kPanelH + 15 << "\" stroke=\"" << kColors[m]
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << x + 25 << "\" y=\"" << kPanelH + 19 << "\">"
        << to_string(kProbeModalities[m]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace triclip
