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

// On-disk chips and embeddings.
//
// Chip record layout (all integers little-endian):
//
//   offset  size   field
//   0       4      magic "TCHP"
//   4       2      version (u16, currently 1)
//   6       8      chip_id (i64)
//   14      1      modality code (0 s1grdm, 1 s2rgbm, 2 gunw)
//   15      4      C (u32)
//   19      4      H (u32)
//   23      4      W (u32)
//   27      1      dtype code (1 = float32)
//   28      C      channel mask, one byte per channel (0 or 1)
//   28+C    4CHW   payload, float32, channel-major
//
// A data directory holds grid.json (the ChipIndex), manifest.json (one entry
// per chip file) and chips/chip_<id>_<modality>.tch.

#ifndef TRICLIP_DATASTORE_HPP_
#define TRICLIP_DATASTORE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "triclip/grid.hpp"
#include "triclip/types.hpp"

namespace triclip {

inline constexpr std::array<char, 4> kChipMagic = {'T', 'C', 'H', 'P'};
inline constexpr std::uint16_t kChipFormatVersion = 1;
inline constexpr std::size_t kChipHeaderBytes = 28;

enum class DType : std::uint8_t { kFloat32 = 1 };

struct ChipRecord {
  std::uint16_t version = kChipFormatVersion;
  ChipId chip_id = 0;
  Modality modality = Modality::kS1grdm;
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  DType dtype = DType::kFloat32;
  std::vector<std::uint8_t> mask;
  std::vector<float> payload;

  friend bool operator==(const ChipRecord&, const ChipRecord&) = default;
};

ChipRecord to_record(const ModalityChip& chip);
ModalityChip to_chip(const ChipRecord& record, int native_scale = 1);

// Throws ValidationError naming the violated invariant: payload size,
// all-false mask, non-binary mask bytes, or non-zero masked channels.
void validate(const ChipRecord& record);

std::string encode_chip_record(const ChipRecord& record);
// Throws FormatError naming the failed field (magic, version, modality,
// dtype, mask, payload, trailing bytes).
ChipRecord decode_chip_record(std::string_view bytes, const std::string& source);

std::string chip_filename(ChipId id, Modality modality);

// Validates, then writes dir/chip_filename(...). Returns the written path.
std::filesystem::path write_chip(const ChipRecord& record,
                                 const std::filesystem::path& dir);
ChipRecord read_chip(const std::filesystem::path& path);

// Thread-safe record of every chip handed to a consumer, tagged with the
// split it was requested under.
class AccessLog {
 public:
  void record(ChipId id, Split split);
  std::vector<std::pair<ChipId, Split>> entries() const;
  bool touched(Split split) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::pair<ChipId, Split>> entries_;
};

// All modalities of one chip; absent modalities are nullopt.
struct ChipTriple {
  ChipId chip_id = 0;
  Split split = Split::kTrain;
  std::array<std::optional<ModalityChip>, kNumModalities> modalities;

  const ModalityChip* get(Modality m) const {
    const auto& slot = modalities[index_of(m)];
    return slot ? &*slot : nullptr;
  }
};

// A split-tagged view; consumers check the tag before touching chips.
struct SplitData {
  Split split = Split::kTrain;
  std::vector<ChipTriple> chips;
};

struct ManifestEntry {
  ChipId chip_id = 0;
  Modality modality = Modality::kS1grdm;
  std::string file;  // relative to the data directory
  int channels = 0;
  int height = 0;
  int width = 0;
  int native_scale = 1;
};

class ChipStore {
 public:
  // Creates the directory layout and writes grid.json.
  static ChipStore create(const std::filesystem::path& dir, ChipIndex index);
  // Reads grid.json and manifest.json. Missing files raise IoError.
  static ChipStore open(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  const ChipIndex& index() const { return index_; }
  // Replaces the split assignment and rewrites grid.json.
  void update_index(ChipIndex index);

  // Writes the chip file and registers it; call save_manifest() afterwards.
  std::filesystem::path put(const ModalityChip& chip);
  void save_manifest() const;

  bool has(ChipId id, Modality m) const;
  std::filesystem::path path_of(ChipId id, Modality m) const;
  const std::map<std::pair<ChipId, Modality>, ManifestEntry>& entries() const {
    return entries_;
  }

  // Chip files (every registered modality) belonging to a split.
  std::vector<std::filesystem::path> files_in(Split split) const;

  ChipTriple load(ChipId id) const;
  // Loads every chip of one split and records each read in `log`.
  SplitData load_split(Split split, AccessLog* log = nullptr) const;

 private:
  std::filesystem::path dir_;
  ChipIndex index_;
  std::map<std::pair<ChipId, Modality>, ManifestEntry> entries_;
};

// Per-chip, per-modality unit-norm embedding vectors of a common dimension.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  explicit EmbeddingSet(int dim);

  int dim() const { return dim_; }
  // Throws InvalidArgument on a wrong length or a norm off 1 by more
  // than 1e-5.
  void set(ChipId id, Modality m, std::vector<float> vec);
  const std::vector<float>* get(ChipId id, Modality m) const;
  bool has(ChipId id, Modality m) const { return get(id, m) != nullptr; }
  std::vector<ChipId> chip_ids() const;
  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  int dim_ = 0;
  std::map<ChipId, std::array<std::vector<float>, kNumModalities>> entries_;
};

// s1grdm ++ s2rgbm ++ gunw, length 3*D. Throws MissingDataError listing
// the absent modalities.
std::vector<float> concat_embeddings(const EmbeddingSet& set, ChipId id);

// embeddings.bin: magic "TEMB", u16 version, u32 dim, u64 count, then per
// chip: i64 id, u8 presence bits (1 << modality code), D float32 per present
// modality in code order. A chip index copy (grid.json) sits alongside so
// consumers can recover splits.
void save_embeddings(const EmbeddingSet& set, const ChipIndex& index,
                     const std::filesystem::path& dir);
EmbeddingSet load_embeddings(const std::filesystem::path& dir);
ChipIndex load_embedding_index(const std::filesystem::path& dir);

}  // namespace triclip

#endif  // TRICLIP_DATASTORE_HPP_
