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

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include "test_support.hpp"
#include "triclip/errors.hpp"
#include "triclip/json_io.hpp"
#include "triclip/parallel.hpp"
#include "triclip/rng.hpp"
#include "triclip/types.hpp"

namespace triclip {
namespace {

TEST(RngTest, DeriveSeedIsPathSensitive) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(1, {2, 0}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
  EXPECT_NE(stream_tag("subset"), stream_tag("forest"));
}

TEST(RngTest, UniformAndNormalMoments) {
  Rng rng(5);
  double su = 0, sn = 0, sn2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.01);
}

TEST(RngTest, BelowIsUnbiasedAndInRange) {
  Rng rng(6);
  std::array<int, 3> hist{};
  for (int i = 0; i < 30000; ++i) {
    auto v = rng.below(3);
    ASSERT_LT(v, 3u);
    hist[v]++;
  }
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);
}

TEST(RngTest, ShuffleIsAPermutation) {
  Rng rng(7);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v.begin(), v.end());
  std::vector<int> s = v;
  std::sort(s.begin(), s.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(s[i], i);
}

TEST(Parallel, CoversEveryIndexOnce) {
  for (int workers : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(101);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; }, workers);
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(Parallel, ChunksAreContiguousAndOrdered) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges(4, {0, 0});
  parallel_chunks(10, [&](int w, std::size_t b, std::size_t e) { ranges[w] = {b, e}; }, 4);
  std::size_t next = 0;
  for (const auto& [b, e] : ranges) {
    if (b == e) continue;
    EXPECT_EQ(b, next);
    next = e;
  }
  EXPECT_EQ(next, 10u);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(
                   20, [](std::size_t i) { if (i == 13) throw std::runtime_error("boom"); }, 3),
               std::runtime_error);
}

TEST(Parallel, WorkerCountHonoursEnvironment) {
  ::setenv("TRICLIP_THREADS", "3", 1);
  EXPECT_EQ(worker_count(), 3);
  ::setenv("TRICLIP_THREADS", "0", 1);
  EXPECT_GE(worker_count(), 1);
  ::unsetenv("TRICLIP_THREADS");
  EXPECT_GE(worker_count(), 1);
}

TEST(Types, NamesRoundtrip) {
  for (Modality m : kModalities) EXPECT_EQ(parse_modality(to_string(m)), m);
  for (Task t : kTasks) EXPECT_EQ(parse_task(to_string(t)), t);
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) EXPECT_EQ(parse_split(to_string(s)), s);
  EXPECT_EQ(to_string(Task::kEsawcPwater), "esawc-pwater");
  EXPECT_EQ(to_string(Modality::kS2rgbm), "s2rgbm");
  EXPECT_THROW(parse_modality("s3"), InvalidArgument);
  EXPECT_THROW(parse_task("trees"), InvalidArgument);
}

TEST(JsonIo, ErrorsCarryThePath) {
  testing::TempDir dir("json");
  try {
    read_json_file(dir / "missing.json");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.json"), std::string::npos);
  }
  testing::write_bytes(dir / "bad.json", "{nope");
  EXPECT_THROW(read_json_file(dir / "bad.json"), FormatError);
  write_json_file(dir / "sub/ok.json", nlohmann::json{{"a", 1}});
  EXPECT_EQ(read_json_file(dir / "sub/ok.json")["a"], 1);
}

TEST(JsonIo, Sha256KnownVector) {
  EXPECT_EQ(sha256_bytes("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace triclip
