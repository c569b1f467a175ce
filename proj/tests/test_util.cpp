/*
 * Copyright 2026 The mosr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <gtest/gtest.h>

#include <set>

#include "mosr/error.hpp"
#include "mosr/util.hpp"
#include "test_support.hpp"

namespace mosr {
namespace {

TEST(HashTest, KnownFnvVectors) {
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(HexDigest(0xabcULL), "0000000000000abc");
}

TEST(RngTest, DerivedStreamsAreStableAndDistinct) {
  Rng a = DeriveRng(1, "x"), b = DeriveRng(1, "x"), c = DeriveRng(1, "y"), d = DeriveRng(2, "x");
  const uint64_t va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
}

TEST(RngTest, UniformIndexCoversRange) {
  Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[UniformIndex(rng, 7)];
  for (int h : hits) EXPECT_NEAR(h, 1000, 150);
  std::vector<int> v = {0, 1, 2, 3, 4, 5};
  Shuffle(v, rng);
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 6u);
}

TEST(CsvTest, QuotingRoundTrip) {
  CsvTable t;
  t.header = {"path", "label"};
  t.rows = {{"a,b.png", "say \"hi\""}, {"multi\nline", ""}, {"plain", "x"}};
  const CsvTable back = ParseCsv(FormatCsv(t));
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.Column("label"), 1u);
  EXPECT_THROW(back.Column("missing"), Error);
}

TEST(FileTest, AtomicWriteCreatesParents) {
  testing::TempDir dir("util");
  const auto p = dir.path() / "a" / "b" / "c.txt";
  WriteFileAtomic(p, "hello");
  EXPECT_EQ(ReadFile(p), "hello");
  WriteFileAtomic(p, "again");
  EXPECT_EQ(ReadFile(p), "again");
  EXPECT_THROW(ReadFile(dir.path() / "nope"), Error);
}

TEST(FormatTest, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5}) {
    EXPECT_EQ(std::stod(FormatDouble(v)), v);
  }
  EXPECT_EQ(FormatDouble(0.5), "0.5");
}

}  // namespace
}  // namespace mosr
