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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "test_support.hpp"
#include "triclip/datastore.hpp"
#include "triclip/errors.hpp"
#include "triclip/parallel.hpp"
#include "triclip/rng.hpp"

namespace triclip {
namespace {

using testing::TempDir;

ChipRecord random_record(Rng& rng, ChipId id, Modality m, int c, int h, int w) {
  ChipRecord r;
  r.chip_id = id;
  r.modality = m;
  r.channels = c;
  r.height = h;
  r.width = w;
  r.mask.assign(c, 1);
  r.payload.resize(static_cast<std::size_t>(c) * h * w);
  for (float& v : r.payload) v = static_cast<float>(rng.normal() * 3.0);
  return r;
}

std::string expect_format_error(const std::string& bytes) {
  try {
    decode_chip_record(bytes, "mem.tch");
  } catch (const FormatError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no FormatError";
  return {};
}

TEST(ChipRecord, RoundtripNineByEightByEight) {
  TempDir dir("ds");
  Rng rng(1);
  ChipRecord r = random_record(rng, 42, Modality::kS2rgbm, 9, 8, 8);
  auto path = write_chip(r, dir.path());
  EXPECT_EQ(path.filename(), chip_filename(42, Modality::kS2rgbm));
  EXPECT_EQ(read_chip(path), r);
  EXPECT_EQ(testing::read_bytes(path).size(), kChipHeaderBytes + 9 + 4 * 9 * 64);
}

TEST(ChipRecord, RoundtripPropertyOverRandomShapes) {
  TempDir dir("ds");
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    int c = 1 + static_cast<int>(rng.below(6));
    int h = 1 + static_cast<int>(rng.below(20));
    int w = 1 + static_cast<int>(rng.below(20));
    auto m = static_cast<Modality>(rng.below(3));
    ChipRecord r = random_record(rng, static_cast<ChipId>(rng()) >> 1, m, c, h, w);
    for (int k = 0; k < c; ++k) {
      if (c > 1 && rng.uniform() < 0.3 && k != 0) {
        r.mask[k] = 0;
        std::fill_n(r.payload.begin() + static_cast<long>(k) * h * w, h * w, 0.0f);
      }
    }
    auto bytes = encode_chip_record(r);
    EXPECT_EQ(decode_chip_record(bytes, "mem"), r);
    auto path = write_chip(r, dir.path());
    EXPECT_EQ(read_chip(path), r);
    EXPECT_EQ(testing::read_bytes(path), bytes);
  }
}

TEST(ChipRecord, LittleEndianHeaderLayout) {
  ChipRecord r;
  r.chip_id = 0x0102030405060708LL;
  r.modality = Modality::kGunw;
  r.channels = 2;
  r.height = 1;
  r.width = 1;
  r.mask = {1, 0};
  r.payload = {1.0f, 0.0f};
  std::string b = encode_chip_record(r);
  ASSERT_EQ(b.size(), kChipHeaderBytes + 2 + 8);
  EXPECT_EQ(b.substr(0, 4), "TCHP");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[5]), 0);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(static_cast<unsigned char>(b[6 + i]), 8 - i);
  EXPECT_EQ(static_cast<unsigned char>(b[14]), 2);
  EXPECT_EQ(static_cast<unsigned char>(b[15]), 2);
  EXPECT_EQ(static_cast<unsigned char>(b[27]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[28]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[29]), 0);
  // 1.0f little-endian is 00 00 80 3f.
  EXPECT_EQ(static_cast<unsigned char>(b[32]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(b[33]), 0x3f);
}

TEST(ChipRecord, ValidationRejectsBadRecords) {
  Rng rng(3);
  ChipRecord r = random_record(rng, 1, Modality::kS1grdm, 3, 4, 4);
  ChipRecord all_false = r;
  all_false.mask.assign(3, 0);
  std::fill(all_false.payload.begin(), all_false.payload.end(), 0.0f);
  EXPECT_THROW(validate(all_false), ValidationError);
  TempDir dir("ds");
  EXPECT_THROW(write_chip(all_false, dir.path()), ValidationError);

  ChipRecord short_payload = r;
  short_payload.payload.pop_back();
  EXPECT_THROW(validate(short_payload), ValidationError);

  ChipRecord nonzero_masked = r;
  nonzero_masked.mask[1] = 0;
  EXPECT_THROW(validate(nonzero_masked), ValidationError);

  ChipRecord bad_mask = r;
  bad_mask.mask[0] = 2;
  EXPECT_THROW(validate(bad_mask), ValidationError);
}

TEST(ChipRecord, DecodeErrorsNameTheField) {
  Rng rng(4);
  std::string good = encode_chip_record(random_record(rng, 5, Modality::kS2rgbm, 2, 3, 3));

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_NE(expect_format_error(bad_magic).find("magic"), std::string::npos);

  std::string bad_version = good;
  bad_version[4] = 9;
  EXPECT_NE(expect_format_error(bad_version).find("version"), std::string::npos);

  std::string bad_modality = good;
  bad_modality[14] = 7;
  EXPECT_NE(expect_format_error(bad_modality).find("modality"), std::string::npos);

  std::string bad_dtype = good;
  bad_dtype[27] = 5;
  EXPECT_NE(expect_format_error(bad_dtype).find("dtype"), std::string::npos);

  std::string truncated = good.substr(0, good.size() - 3);
  EXPECT_NE(expect_format_error(truncated).find("payload"), std::string::npos);

  std::string trailing = good + "xx";
  EXPECT_NE(expect_format_error(trailing).find("trailing"), std::string::npos);

  EXPECT_NE(expect_format_error("TC").find("mem.tch"), std::string::npos);
}

TEST(ChipRecord, MissingFileIsIoError) {
  TempDir dir("ds");
  EXPECT_THROW(read_chip(dir / "nope.tch"), IoError);
}

TEST(ChipStore, GunwWithTwoAndFiveChannels) {
  TempDir dir("ds");
  ChipStore store = ChipStore::create(dir.path(), build_grid("a", 1, 2));
  for (int c : {2, 5}) {
    ModalityChip chip;
    chip.chip_id = c == 2 ? 0 : 1;
    chip.modality = Modality::kGunw;
    chip.channels = c;
    chip.height = 4;
    chip.width = 4;
    chip.data.assign(static_cast<std::size_t>(c) * 16, 0.5f);
    chip.channel_mask.assign(c, 1);
    chip.native_scale = 4;
    store.put(chip);
  }
  store.save_manifest();
  ChipStore again = ChipStore::open(dir.path());
  ChipTriple a = again.load(0);
  ChipTriple b = again.load(1);
  ASSERT_NE(a.get(Modality::kGunw), nullptr);
  ASSERT_NE(b.get(Modality::kGunw), nullptr);
  EXPECT_EQ(a.get(Modality::kGunw)->channels, 2);
  EXPECT_EQ(b.get(Modality::kGunw)->channels, 5);
  EXPECT_EQ(b.get(Modality::kGunw)->native_scale, 4);
  EXPECT_EQ(a.get(Modality::kS1grdm), nullptr);
}

TEST(ChipStore, SplitLoadingRecordsAccess) {
  TempDir dir("ds");
  ChipIndex idx = assign_splits(build_grid("a", 2, 5), 1, default_split_pattern(), 0);
  ChipStore store = ChipStore::create(dir.path(), idx);
  for (const GridChip& g : idx.chips) {
    SyntheticChip chip = generate_chip(1, g.id, 16, 0.05);
    for (const auto& m : chip.modalities) store.put(m);
  }
  store.save_manifest();
  AccessLog log;
  SplitData train = store.load_split(Split::kTrain, &log);
  EXPECT_EQ(train.split, Split::kTrain);
  EXPECT_EQ(train.chips.size(), 6u);
  EXPECT_TRUE(log.touched(Split::kTrain));
  EXPECT_FALSE(log.touched(Split::kTest));
  EXPECT_EQ(log.size(), 6u);
  for (const ChipTriple& t : train.chips) {
    EXPECT_EQ(idx.chip(t.chip_id).split, Split::kTrain);
    SyntheticChip ref = generate_chip(1, t.chip_id, 16, 0.05);
    for (int m = 0; m < kNumModalities; ++m) EXPECT_EQ(*t.modalities[m], ref.modalities[m]);
  }
  EXPECT_EQ(store.files_in(Split::kTest).size(), 2u * 3u);
}

TEST(ChipStore, CorruptedChipNamesTheFile) {
  TempDir dir("ds");
  ChipStore store = ChipStore::create(dir.path(), build_grid("a", 1, 1));
  SyntheticChip chip = generate_chip(1, 0, 16, 0.05);
  for (const auto& m : chip.modalities) store.put(m);
  store.save_manifest();
  auto path = store.path_of(0, Modality::kS2rgbm);
  std::string bytes = testing::read_bytes(path);
  testing::write_bytes(path, bytes.substr(0, bytes.size() / 2));
  try {
    ChipStore::open(dir.path()).load(0);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(path.filename().string()), std::string::npos);
  }
}

TEST(ChipStore, OpenMissingDirectoryIsIoError) {
  TempDir dir("ds");
  EXPECT_THROW(ChipStore::open(dir / "absent"), IoError);
}

TEST(Embeddings, ConcatOrderAndNorm) {
  EmbeddingSet set(2);
  set.set(3, Modality::kS1grdm, {1.0f, 0.0f});
  set.set(3, Modality::kS2rgbm, {0.0f, 1.0f});
  set.set(3, Modality::kGunw, {1.0f, 0.0f});
  EXPECT_EQ(concat_embeddings(set, 3), (std::vector<float>{1, 0, 0, 1, 1, 0}));
}

TEST(Embeddings, ConcatLengthAndSquaredNormThree) {
  Rng rng(5);
  for (int d : {16, 64, 768}) {
    EmbeddingSet set(d);
    for (Modality m : kModalities) {
      std::vector<float> v(d);
      double n = 0;
      for (float& x : v) {
        x = static_cast<float>(rng.normal());
        n += double(x) * x;
      }
      for (float& x : v) x = static_cast<float>(x / std::sqrt(n));
      set.set(1, m, v);
    }
    auto c = concat_embeddings(set, 1);
    EXPECT_EQ(c.size(), static_cast<std::size_t>(3 * d));
    double sq = 0;
    for (float x : c) sq += double(x) * x;
    EXPECT_NEAR(sq, 3.0, 1e-5);
  }
}

TEST(Embeddings, MissingModalityListed) {
  EmbeddingSet set(2);
  set.set(3, Modality::kS2rgbm, {0.0f, 1.0f});
  try {
    concat_embeddings(set, 3);
    FAIL();
  } catch (const MissingDataError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("s1grdm"), std::string::npos);
    EXPECT_NE(msg.find("gunw"), std::string::npos);
  }
}

TEST(Embeddings, RejectsWrongLengthOrNorm) {
  EmbeddingSet set(2);
  EXPECT_THROW(set.set(1, Modality::kGunw, {1.0f}), InvalidArgument);
  EXPECT_THROW(set.set(1, Modality::kGunw, {1.0f, 1.0f}), InvalidArgument);
}

TEST(Embeddings, FileRoundtrip) {
  TempDir dir("emb");
  EmbeddingSet set(3);
  set.set(0, Modality::kS1grdm, {1.0f, 0.0f, 0.0f});
  set.set(0, Modality::kGunw, {0.0f, 0.6f, 0.8f});
  set.set(9, Modality::kS2rgbm, {0.0f, 0.0f, 1.0f});
  ChipIndex idx = assign_splits(build_grid("a", 2, 5), 1, default_split_pattern(), 0);
  save_embeddings(set, idx, dir.path());
  EXPECT_EQ(load_embeddings(dir.path()), set);
  EXPECT_EQ(load_embedding_index(dir.path()), idx);
}

TEST(AccessLogTest, ThreadSafeRecording) {
  AccessLog log;
  parallel_for(1000, [&](std::size_t i) { log.record(static_cast<ChipId>(i), Split::kVal); }, 4);
  EXPECT_EQ(log.size(), 1000u);
  EXPECT_TRUE(log.touched(Split::kVal));
  EXPECT_FALSE(log.touched(Split::kTrain));
}

}  // namespace
}  // namespace triclip
