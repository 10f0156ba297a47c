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

#include "triclip/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "byte_io.hpp"
#include "triclip/errors.hpp"
#include "triclip/json_io.hpp"

namespace triclip {
namespace fs = std::filesystem;
using detail::ByteReader;
using detail::ByteWriter;

namespace {

constexpr std::array<char, 4> kEmbeddingMagic = {'T', 'E', 'M', 'B'};
constexpr std::uint16_t kEmbeddingFormatVersion = 1;

}  // namespace

ChipRecord to_record(const ModalityChip& chip) {
  ChipRecord r;
  r.chip_id = chip.chip_id;
  r.modality = chip.modality;
  r.channels = static_cast<std::uint32_t>(chip.channels);
  r.height = static_cast<std::uint32_t>(chip.height);
  r.width = static_cast<std::uint32_t>(chip.width);
  r.mask = chip.channel_mask;
  r.payload = chip.data;
  return r;
}

ModalityChip to_chip(const ChipRecord& record, int native_scale) {
  ModalityChip chip;
  chip.chip_id = record.chip_id;
  chip.modality = record.modality;
  chip.channels = static_cast<int>(record.channels);
  chip.height = static_cast<int>(record.height);
  chip.width = static_cast<int>(record.width);
  chip.channel_mask = record.mask;
  chip.data = record.payload;
  chip.native_scale = native_scale;
  return chip;
}

void validate(const ChipRecord& r) {
  const std::string who = "chip " + std::to_string(r.chip_id) + "/" +
                          std::string(to_string(r.modality));
  if (r.channels == 0 || r.height == 0 || r.width == 0) {
    throw ValidationError(who + ": empty shape");
  }
  if (r.mask.size() != r.channels) {
    throw ValidationError(who + ": mask has " + std::to_string(r.mask.size()) +
                          " entries for " + std::to_string(r.channels) + " channels");
  }
  const std::size_t plane = static_cast<std::size_t>(r.height) * r.width;
  if (r.payload.size() != plane * r.channels) {
    throw ValidationError(who + ": payload holds " + std::to_string(r.payload.size()) +
                          " values, expected C*H*W=" + std::to_string(plane * r.channels));
  }
  bool any = false;
  for (std::uint32_t c = 0; c < r.channels; ++c) {
    if (r.mask[c] > 1) throw ValidationError(who + ": mask bytes must be 0 or 1");
    if (r.mask[c]) {
      any = true;
      continue;
    }
    auto first = r.payload.begin() + static_cast<std::ptrdiff_t>(c * plane);
    if (std::any_of(first, first + static_cast<std::ptrdiff_t>(plane),
                    [](float v) { return v != 0.0f; })) {
      throw ValidationError(who + ": masked-out channel " + std::to_string(c) +
                            " holds non-zero data");
    }
  }
  if (!any) throw ValidationError(who + ": channel mask is all false");
}

std::string encode_chip_record(const ChipRecord& r) {
  ByteWriter w;
  w.bytes(std::string_view(kChipMagic.data(), kChipMagic.size()));
  w.u16(r.version);
  w.i64(r.chip_id);
  w.u8(static_cast<std::uint8_t>(r.modality));
  w.u32(r.channels);
  w.u32(r.height);
  w.u32(r.width);
  w.u8(static_cast<std::uint8_t>(r.dtype));
  for (std::uint8_t m : r.mask) w.u8(m);
  for (float v : r.payload) w.f32(v);
  return w.str();
}

ChipRecord decode_chip_record(std::string_view bytes, const std::string& source) {
  ByteReader in(bytes, source);
  auto magic = in.bytes(4, "magic");
  if (magic != std::string_view(kChipMagic.data(), kChipMagic.size())) {
    throw FormatError(source + ": bad magic (not a chip record)");
  }
  ChipRecord r;
  r.version = in.u16("version");
  if (r.version != kChipFormatVersion) {
    throw FormatError(source + ": version mismatch (file " +
                      std::to_string(r.version) + ", reader " +
                      std::to_string(kChipFormatVersion) + ")");
  }
  r.chip_id = in.i64("chip_id");
  const std::uint8_t modality = in.u8("modality");
  if (modality > 2) {
    throw FormatError(source + ": unknown modality code " + std::to_string(modality));
  }
  r.modality = static_cast<Modality>(modality);
  r.channels = in.u32("channels");
  r.height = in.u32("height");
  r.width = in.u32("width");
  const std::uint8_t dtype = in.u8("dtype");
  if (dtype != static_cast<std::uint8_t>(DType::kFloat32)) {
    throw FormatError(source + ": unknown dtype code " + std::to_string(dtype));
  }
  auto mask = in.bytes(r.channels, "mask");
  r.mask.assign(mask.begin(), mask.end());
  const std::uint64_t count =
      static_cast<std::uint64_t>(r.channels) * r.height * r.width;
  if (count * 4 > in.remaining()) {
    throw FormatError(source + ": truncated payload (need " +
                      std::to_string(count * 4) + " bytes, have " +
                      std::to_string(in.remaining()) + ")");
  }
  r.payload.resize(count);
  for (auto& v : r.payload) v = in.f32("payload");
  if (in.remaining() != 0) {
    throw FormatError(source + ": " + std::to_string(in.remaining()) +
                      " trailing bytes after payload");
  }
  return r;
}

std::string chip_filename(ChipId id, Modality modality) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "chip_%08lld_%s.tch",
                static_cast<long long>(id), std::string(to_string(modality)).c_str());
  return buf;
}

fs::path write_chip(const ChipRecord& record, const fs::path& dir) {
  validate(record);
  fs::path path = dir / chip_filename(record.chip_id, record.modality);
  detail::write_file_bytes(path, encode_chip_record(record));
  return path;
}

ChipRecord read_chip(const fs::path& path) {
  return decode_chip_record(detail::read_file_bytes(path), path.string());
}

void AccessLog::record(ChipId id, Split split) {
  std::lock_guard<std::mutex> lock(mu_);
  entries_.emplace_back(id, split);
}

std::vector<std::pair<ChipId, Split>> AccessLog::entries() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_;
}

bool AccessLog::touched(Split split) const {
  std::lock_guard<std::mutex> lock(mu_);
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.second == split; });
}

std::size_t AccessLog::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

ChipStore ChipStore::create(const fs::path& dir, ChipIndex index) {
  ChipStore store;
  store.dir_ = dir;
  store.index_ = std::move(index);
  fs::create_directories(dir / "chips");
  save_chip_index(store.index_, dir / "grid.json");
  return store;
}

ChipStore ChipStore::open(const fs::path& dir) {
  ChipStore store;
  store.dir_ = dir;
  store.index_ = load_chip_index(dir / "grid.json");
  const auto manifest = read_json_file(dir / "manifest.json");
  try {
    for (const auto& e : manifest.at("entries")) {
      ManifestEntry entry;
      entry.chip_id = e.at("chip_id").get<ChipId>();
      entry.modality = parse_modality(e.at("modality").get<std::string>());
      entry.file = e.at("file").get<std::string>();
      entry.channels = e.at("channels").get<int>();
      entry.height = e.at("height").get<int>();
      entry.width = e.at("width").get<int>();
      entry.native_scale = e.value("native_scale", 1);
      store.entries_[{entry.chip_id, entry.modality}] = entry;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  return store;
}

void ChipStore::update_index(ChipIndex index) {
  index_ = std::move(index);
  save_chip_index(index_, dir_ / "grid.json");
}

fs::path ChipStore::put(const ModalityChip& chip) {
  fs::path path = write_chip(to_record(chip), dir_ / "chips");
  ManifestEntry entry{chip.chip_id, chip.modality,
                      (fs::path("chips") / path.filename()).generic_string(),
                      chip.channels, chip.height, chip.width, chip.native_scale};
  entries_[{chip.chip_id, chip.modality}] = std::move(entry);
  return path;
}

void ChipStore::save_manifest() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, e] : entries_) {
    entries.push_back({{"chip_id", e.chip_id},
                       {"modality", to_string(e.modality)},
                       {"file", e.file},
                       {"channels", e.channels},
                       {"height", e.height},
                       {"width", e.width},
                       {"native_scale", e.native_scale}});
  }
  write_json_file(dir_ / "manifest.json",
                  {{"format", "triclip-chips"},
                   {"version", kChipFormatVersion},
                   {"aoi_name", index_.aoi_name},
                   {"entries", std::move(entries)}});
}

bool ChipStore::has(ChipId id, Modality m) const {
  return entries_.count({id, m}) > 0;
}

fs::path ChipStore::path_of(ChipId id, Modality m) const {
  auto it = entries_.find({id, m});
  if (it == entries_.end()) {
    throw MissingDataError("chip " + std::to_string(id) + " has no " +
                           std::string(to_string(m)) + " file");
  }
  return dir_ / it->second.file;
}

std::vector<fs::path> ChipStore::files_in(Split split) const {
  std::vector<fs::path> out;
  for (ChipId id : index_.ids_in(split)) {
    for (Modality m : kModalities) {
      auto it = entries_.find({id, m});
      if (it != entries_.end()) out.push_back(dir_ / it->second.file);
    }
  }
  return out;
}

ChipTriple ChipStore::load(ChipId id) const {
  ChipTriple triple;
  triple.chip_id = id;
  triple.split = index_.chip(id).split;
  for (Modality m : kModalities) {
    auto it = entries_.find({id, m});
    if (it == entries_.end()) continue;
    ChipRecord record = read_chip(dir_ / it->second.file);
    if (record.chip_id != id || record.modality != m) {
      throw FormatError((dir_ / it->second.file).string() +
                        ": header does not match manifest entry");
    }
    triple.modalities[index_of(m)] = to_chip(record, it->second.native_scale);
  }
  return triple;
}

SplitData ChipStore::load_split(Split split, AccessLog* log) const {
  SplitData out;
  out.split = split;
  for (ChipId id : index_.ids_in(split)) {
    if (log) log->record(id, split);
    out.chips.push_back(load(id));
  }
  return out;
}

EmbeddingSet::EmbeddingSet(int dim) : dim_(dim) {
  if (dim < 1) throw InvalidArgument("embedding dimension must be positive");
}

void EmbeddingSet::set(ChipId id, Modality m, std::vector<float> vec) {
  if (static_cast<int>(vec.size()) != dim_) {
    throw InvalidArgument("embedding for chip " + std::to_string(id) + " has length " +
                          std::to_string(vec.size()) + ", expected " +
                          std::to_string(dim_));
  }
  double sq = 0.0;
  for (float v : vec) sq += static_cast<double>(v) * v;
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-5) {
    throw InvalidArgument("embedding for chip " + std::to_string(id) +
                          " is not unit norm (" + std::to_string(std::sqrt(sq)) + ")");
  }
  entries_[id][index_of(m)] = std::move(vec);
}

const std::vector<float>* EmbeddingSet::get(ChipId id, Modality m) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) return nullptr;
  const auto& v = it->second[index_of(m)];
  return v.empty() ? nullptr : &v;
}

std::vector<ChipId> EmbeddingSet::chip_ids() const {
  std::vector<ChipId> ids;
  ids.reserve(entries_.size());
  for (const auto& [id, _] : entries_) ids.push_back(id);
  return ids;
}

std::vector<float> concat_embeddings(const EmbeddingSet& set, ChipId id) {
  std::string missing;
  for (Modality m : kModalities) {
    if (!set.has(id, m)) {
      if (!missing.empty()) missing += ", ";
      missing += to_string(m);
    }
  }
  if (!missing.empty()) {
    throw MissingDataError("chip " + std::to_string(id) +
                           " lacks embeddings for: " + missing);
  }
  std::vector<float> out;
  out.reserve(3 * static_cast<std::size_t>(set.dim()));
  for (Modality m : kModalities) {
    const auto* v = set.get(id, m);
    out.insert(out.end(), v->begin(), v->end());
  }
  return out;
}

void save_embeddings(const EmbeddingSet& set, const ChipIndex& index,
                     const fs::path& dir) {
  ByteWriter w;
  w.bytes(std::string_view(kEmbeddingMagic.data(), kEmbeddingMagic.size()));
  w.u16(kEmbeddingFormatVersion);
  w.u32(static_cast<std::uint32_t>(set.dim()));
  const auto ids = set.chip_ids();
  w.u64(ids.size());
  for (ChipId id : ids) {
    w.i64(id);
    std::uint8_t bits = 0;
    for (Modality m : kModalities) {
      if (set.has(id, m)) bits |= static_cast<std::uint8_t>(1u << index_of(m));
    }
    w.u8(bits);
    for (Modality m : kModalities) {
      if (const auto* v = set.get(id, m)) {
        for (float x : *v) w.f32(x);
      }
    }
  }
  detail::write_file_bytes(dir / "embeddings.bin", w.str());
  save_chip_index(index, dir / "grid.json");
}

EmbeddingSet load_embeddings(const fs::path& dir) {
  const fs::path path = dir / "embeddings.bin";
  const std::string bytes = detail::read_file_bytes(path);
  ByteReader in(bytes, path.string());
  if (in.bytes(4, "magic") !=
      std::string_view(kEmbeddingMagic.data(), kEmbeddingMagic.size())) {
    throw FormatError(path.string() + ": bad magic (not an embedding file)");
  }
  const auto version = in.u16("version");
  if (version != kEmbeddingFormatVersion) {
    throw FormatError(path.string() + ": version mismatch");
  }
  const int dim = static_cast<int>(in.u32("dim"));
  const std::uint64_t count = in.u64("count");
  EmbeddingSet set(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const ChipId id = in.i64("chip_id");
    const std::uint8_t bits = in.u8("presence");
    for (Modality m : kModalities) {
      if (!(bits & (1u << index_of(m)))) continue;
      std::vector<float> v(dim);
      for (float& x : v) x = in.f32("vector");
      set.set(id, m, std::move(v));
    }
  }
  if (in.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
  return set;
}

ChipIndex load_embedding_index(const fs::path& dir) {
  return load_chip_index(dir / "grid.json");
}

}  // namespace triclip
