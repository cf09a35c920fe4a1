/*
 * Licensed to the Apache Software Foundation (ASF) under one
 * or more contributor license agreements.  See the NOTICE file
 * distributed with this work for additional information
 * regarding copyright ownership.  The ASF licenses this file
 * to you under the Apache License, Version 2.0 (the
 * "License"); you may not use this file except in compliance
 * with the License.  You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing,
 * software distributed under the License is distributed on an
 * "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, either express or implied.  See the License for the
 * specific language governing permissions and limitations
 * under the License.
 */

#include <gtest/gtest.h>

#include <random>

#include "accel/workload.hpp"

namespace accel {
namespace {

ConvLayer conv(int h, int k, int p, int s, int fi = 16, int fo = 16) {
  ConvLayer l;
  l.name = "l";
  l.h = l.w = h;
  l.kh = l.kw = k;
  l.ph = l.pw = p;
  l.sh = l.sw = s;
  l.fi = fi;
  l.fo = fo;
  return l;
}

TEST(Workload, OutputDims) {
  EXPECT_EQ(output_dims(conv(56, 3, 1, 1)).oh, 56);
  EXPECT_EQ(output_dims(conv(14, 3, 1, 2)).oh, 7);
  EXPECT_EQ(output_dims(conv(7, 7, 0, 1)).oh, 1);
}

TEST(Workload, MacCount) {
  EXPECT_EQ(mac_count(conv(8, 3, 1, 1)), 147456);
  ConvLayer d;
  d.kind = LayerKind::kDense;
  d.fi = 512;
  d.fo = 10;
  EXPECT_EQ(mac_count(d), 5120);
  ConvLayer dw = conv(4, 3, 1, 1, 8, 8);
  dw.kind = LayerKind::kDepthwise;
  EXPECT_EQ(mac_count(dw), 1152);
}

TEST(Workload, PadChannels) {
  AccelConfig cfg;
  EXPECT_EQ(pad_channels(conv(8, 3, 1, 1, 3, 16), cfg).fi, 16);
  EXPECT_EQ(pad_channels(conv(8, 3, 1, 1, 64, 16), cfg).fi, 64);
  EXPECT_EQ(pad_channels(conv(8, 3, 1, 1, 16, 10), cfg).fo, 16);
}

TEST(Workload, Invalid) {
  EXPECT_THROW(conv(4, 7, 0, 1).validate(), WorkloadError);
  EXPECT_THROW(conv(8, 3, 1, 0).validate(), WorkloadError);
  EXPECT_THROW(load_workload("[{\"kind\":\"conv\",\"bogus\":1}]"), WorkloadError);
  EXPECT_THROW(load_workload_file("/nonexistent.json"), WorkloadError);
}

TEST(Workload, SerializeRoundTrip) {
  std::vector<ConvLayer> ls = {conv(56, 3, 1, 1, 64, 64), conv(14, 1, 0, 2, 256, 512)};
  ls[1].kind = LayerKind::kConv;
  ls[1].name = "down";
  EXPECT_EQ(load_workload(serialize_workload(ls)), ls);
  EXPECT_EQ(layer_from_json(layer_to_json(ls[0])), ls[0]);
}

TEST(Workload, OutputDimsMonotone) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const int h = 4 + static_cast<int>(rng() % 40);
    const int k = 1 + static_cast<int>(rng() % 5);
    const int p = static_cast<int>(rng() % 3);
    const int s = 1 + static_cast<int>(rng() % 3);
    if (h + 2 * p < k + 1) continue;
    const int base = output_dims(conv(h, k, p, s)).oh;
    EXPECT_LE(output_dims(conv(h, k, p, s + 1)).oh, base);
    EXPECT_LE(output_dims(conv(h, k + 1, p, s)).oh, base);
    EXPECT_GE(output_dims(conv(h, k, p + 1, s)).oh, base);
  }
}

TEST(Workload, PaddingKeepsMacCount) {
  AccelConfig cfg;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    ConvLayer l = conv(8, 3, 1, 1, 1 + static_cast<int>(rng() % 40), 1 + static_cast<int>(rng() % 40));
    const ConvLayer p = pad_channels(l, cfg);
    EXPECT_EQ(p.fi % cfg.block_in, 0);
    EXPECT_EQ(p.fo % cfg.block_out, 0);
    EXPECT_EQ(mac_count(l), static_cast<std::int64_t>(8) * 8 * 9 * l.fi * l.fo);
  }
}

TEST(Workload, BundledFilesLoad) {
  const std::string dir = ACCEL_DATA_DIR;
  EXPECT_EQ(load_workload_file(dir + "/workloads/resnet18.json").size(), 10u);
  EXPECT_GT(load_workload_file(dir + "/workloads/mobilenet1.0.json").size(), 20u);
  EXPECT_EQ(load_workload_file(dir + "/workloads/small_conv.json").size(), 5u);
}

}  // namespace
}  // namespace accel
