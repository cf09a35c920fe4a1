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

#include <algorithm>
#include <random>

#include "accel/codegen.hpp"
#include "accel/engine.hpp"
#include "accel/tps.hpp"
#include "harness.hpp"

namespace accel {
namespace {

ConvLayer layer(LayerKind kind, int h, int fi, int fo, int k, int p, int s) {
  ConvLayer l;
  l.name = "t";
  l.kind = kind;
  l.h = l.w = h;
  l.fi = fi;
  l.fo = fo;
  l.kh = l.kw = k;
  l.ph = l.pw = p;
  l.sh = l.sw = s;
  return l;
}

TEST(Codegen, IdentityTilingSequence) {
  AccelConfig cfg;
  const auto s = gen_conv_stream(layer(LayerKind::kConv, 4, 16, 16, 1, 0, 1), cfg, TilingParams{});
  ASSERT_EQ(s.insns.size(), 7u);
  const auto& i = s.insns;
  EXPECT_TRUE(i[0].opcode == Opcode::kLoad && i[0].mem_kind == MemKind::kUop);
  EXPECT_TRUE(i[1].opcode == Opcode::kLoad && i[1].mem_kind == MemKind::kInp);
  EXPECT_TRUE(i[2].opcode == Opcode::kLoad && i[2].mem_kind == MemKind::kWgt);
  EXPECT_TRUE(i[3].opcode == Opcode::kGemm && i[3].reset);
  EXPECT_TRUE(i[4].opcode == Opcode::kGemm && !i[4].reset);
  EXPECT_EQ(i[5].opcode, Opcode::kStore);
  EXPECT_EQ(i[6].opcode, Opcode::kFinish);
  // LD->CMP, then CMP->ST, then ST->CMP into FINISH
  EXPECT_TRUE(i[2].push_next);
  EXPECT_TRUE(i[4].pop_prev && i[4].push_next);
  EXPECT_TRUE(i[5].pop_prev && i[5].push_prev);
  EXPECT_TRUE(i[6].pop_next);
  EXPECT_EQ(validate_tokens(s).message(), "ok");
  EXPECT_EQ(i[1].y_size * i[1].x_size, 16u);
  EXPECT_EQ(i[4].iter_out * i[4].iter_in, 16u);
}

TEST(Codegen, EncodeRoundTrip) {
  AccelConfig cfg;
  std::mt19937_64 rng(1);
  for (const auto& l : {layer(LayerKind::kConv, 8, 32, 32, 3, 1, 1),
                        layer(LayerKind::kConv, 8, 16, 32, 1, 0, 2),
                        layer(LayerKind::kDepthwise, 8, 32, 32, 3, 1, 1),
                        layer(LayerKind::kMaxPool, 8, 16, 16, 2, 0, 2)}) {
    const InstructionStream s = compile_layer(l, cfg);
    EXPECT_EQ(decode_stream(encode_stream(s, cfg), cfg), s);
    EXPECT_EQ(stream_from_jsonl(stream_to_jsonl(s)), s);
    for (const auto& in : s.insns) EXPECT_EQ(instruction_from_json(instruction_to_json(in)), in);
  }
}

TEST(Codegen, IndexOverflowRejected) {
  AccelConfig cfg;
  const auto layout = derive_instruction_layout(cfg);
  Instruction in = Instruction::load(MemKind::kInp, 1u << 20, 0, 1, 1, 1);
  EXPECT_THROW(encode_instruction(in, layout), CodegenError);
  Uop u{1u << 20, 0, 0};
  EXPECT_THROW(encode_uop(u, layout), CodegenError);
}

TEST(Codegen, GeneratedIndicesFitLayout) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 30; ++i) {
    AccelConfig cfg;
    cfg.block_in = cfg.block_out = 16 << (rng() % 2);
    const int h = 4 << (rng() % 3);
    const ConvLayer l = layer(LayerKind::kConv, h, 16 << (rng() % 3), 16 << (rng() % 3),
                              1 + 2 * (rng() % 2), static_cast<int>(rng() % 2), 1);
    const InstructionStream s = compile_layer(l, cfg);
    EXPECT_NO_THROW(check_stream_fits(s, cfg));
    EXPECT_NO_THROW(encode_stream(s, cfg));
  }
}

TEST(Codegen, ConvMatchesOracleAcrossTilings) {
  AccelConfig cfg;
  std::mt19937_64 rng(3);
  const ConvLayer l = layer(LayerKind::kConv, 8, 32, 32, 3, 1, 1);
  const auto data = harness::random_data(l, rng);
  const Tensor4 ref = harness::reference(l, cfg, data);
  for (const TilingParams& p : {TilingParams{1, 1, 1, 1, 1, 1, 1}, TilingParams{1, 2, 2, 2, 2, 2, 1},
                                TilingParams{1, 2, 1, 2, 1, 1, 2}, TilingParams{1, 4, 2, 1, 2, 1, 1}}) {
    const auto out = harness::simulate(l, cfg, gen_conv_stream(l, cfg, p), data);
    ASSERT_TRUE(out.report.completed) << p.to_string();
    EXPECT_EQ(out.output, ref) << p.to_string();
  }
}

TEST(Codegen, RequantMatchesOracle) {
  AccelConfig cfg;
  std::mt19937_64 rng(4);
  const ConvLayer l = layer(LayerKind::kConv, 4, 16, 16, 3, 1, 1);
  const auto data = harness::random_data(l, rng);
  RequantOptions rq;
  rq.shift = 6;
  rq.clip = 100;
  const auto out = harness::simulate(l, cfg, compile_layer(l, cfg, rq), data);
  EXPECT_EQ(out.output, harness::reference(l, cfg, data, rq));
}

TEST(Codegen, MaxPoolKnownInput) {
  AccelConfig cfg;
  const ConvLayer l = layer(LayerKind::kMaxPool, 4, 1, 1, 2, 0, 2);
  harness::LayerData d;
  d.input = Tensor4(1, 1, 4, 4);
  for (int i = 0; i < 16; ++i) d.input.data[i] = (i * 7) % 16 - 8;
  const auto out = harness::simulate(l, cfg, compile_layer(l, cfg), d);
  Tensor4 expect(1, 1, 2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      int m = -128;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) m = std::max(m, d.input.at(0, 0, 2 * y + dy, 2 * x + dx));
      expect.at(0, 0, y, x) = m;
    }
  EXPECT_EQ(out.output, expect);
}

TEST(Codegen, DepthwiseMatchesOracle) {
  AccelConfig cfg;
  std::mt19937_64 rng(5);
  const ConvLayer l = layer(LayerKind::kDepthwise, 4, 8, 8, 3, 1, 1);
  const auto d = harness::random_data(l, rng);
  EXPECT_EQ(harness::simulate(l, cfg, compile_layer(l, cfg), d).output, harness::reference(l, cfg, d));
}

TEST(Codegen, MaxPoolPaddingNeverWins) {
  AccelConfig cfg;
  std::mt19937_64 rng(6);
  const ConvLayer l = layer(LayerKind::kMaxPool, 6, 16, 16, 3, 1, 1);
  harness::LayerData d;
  d.input = oracle::random_tensor(rng, 1, 16, 6, 6, -128, -1);
  const auto out = harness::simulate(l, cfg, compile_layer(l, cfg), d);
  EXPECT_EQ(out.output, harness::reference(l, cfg, d));
  for (int v : out.output.data) EXPECT_LT(v, 0);
}

TEST(Codegen, AvgPoolMatchesOracle) {
  AccelConfig cfg;
  std::mt19937_64 rng(7);
  const ConvLayer l = layer(LayerKind::kAvgPool, 8, 16, 16, 2, 0, 2);
  const auto d = harness::random_data(l, rng);
  EXPECT_EQ(harness::simulate(l, cfg, compile_layer(l, cfg), d).output, harness::reference(l, cfg, d));
  EXPECT_THROW(compile_layer(layer(LayerKind::kAvgPool, 9, 16, 16, 3, 0, 3), cfg), CodegenError);
}

TEST(Codegen, DenseMatchesOracle) {
  AccelConfig cfg;
  std::mt19937_64 rng(8);
  ConvLayer l;
  l.name = "fc";
  l.kind = LayerKind::kDense;
  l.fi = 64;
  l.fo = 20;
  const auto d = harness::random_data(l, rng);
  EXPECT_EQ(harness::simulate(l, cfg, compile_layer(l, cfg), d).output, harness::reference(l, cfg, d));
}

/*! \brief Walk an assignment: every load must bring a chunk not already resident. */
void check_assignment(const ConvPlan& p) {
  auto walk = [&](auto chunk, const std::vector<int>& slot, const std::vector<bool>& load) {
    std::vector<std::int64_t> resident(p.threads, -1);
    for (std::size_t k = 0; k < p.stages.size(); ++k) {
      const std::int64_t c = chunk(p.stages[k]);
      if (load[k]) {
        EXPECT_EQ(std::count(resident.begin(), resident.end(), c), 0) << "stage " << k;
        resident[slot[k]] = c;
      } else {
        EXPECT_EQ(resident[slot[k]], c) << "stage " << k;
      }
    }
  };
  walk([&](const ConvStage& s) { return p.inp_chunk(s); }, p.assignment.inp_slot, p.assignment.load_inp);
  walk([&](const ConvStage& s) { return p.wgt_chunk(s); }, p.assignment.wgt_slot, p.assignment.load_wgt);
}

TEST(Codegen, EliminationRemovesEveryDuplicate) {
  AccelConfig cfg;
  std::mt19937_64 rng(9);
  const ConvLayer l = layer(LayerKind::kConv, 8, 32, 32, 3, 1, 1);
  const auto d = harness::random_data(l, rng);
  const Tensor4 ref = harness::reference(l, cfg, d);
  for (const TilingParams& p : {TilingParams{1, 2, 2, 2, 2, 2, 1}, TilingParams{1, 4, 1, 1, 2, 1, 2},
                                TilingParams{1, 2, 2, 2, 1, 2, 1}, TilingParams{1, 1, 1, 1, 1, 1, 1}}) {
    const InstructionStream s = gen_conv_stream(l, cfg, p);
    const InstructionStream e = eliminate_redundant_loads(s);
    ASSERT_TRUE(e.plan);
    check_assignment(*e.plan);
    const auto bs = static_dram_bytes(s, cfg), be = static_dram_bytes(e, cfg);
    EXPECT_LE(be.total(), bs.total());
    EXPECT_EQ(be[MemKind::kOut], bs[MemKind::kOut]);
    EXPECT_EQ(validate_tokens(e).message(), "ok");
    const auto out = harness::simulate(l, cfg, e, d);
    ASSERT_TRUE(out.report.completed);
    EXPECT_EQ(out.output, ref) << p.to_string();
  }
}

TEST(Codegen, EliminationHalvesDoubleBufferedLoads) {
  AccelConfig cfg;
  const ConvLayer l = layer(LayerKind::kConv, 8, 32, 32, 1, 0, 1);
  const InstructionStream s = gen_conv_stream(l, cfg, TilingParams{1, 4, 1, 1, 2, 1, 2});
  const InstructionStream e = eliminate_redundant_loads(s);
  const auto bs = static_dram_bytes(s, cfg), be = static_dram_bytes(e, cfg);
  const double before = bs[MemKind::kInp] + bs[MemKind::kWgt];
  const double after = be[MemKind::kInp] + be[MemKind::kWgt];
  EXPECT_NEAR(after / before, 0.5, 0.05);
}

TEST(Codegen, EliminationIdentityWithoutDuplicates) {
  AccelConfig cfg;
  const ConvLayer l = layer(LayerKind::kConv, 4, 16, 16, 1, 0, 1);
  const InstructionStream s = gen_conv_stream(l, cfg, TilingParams{});
  const InstructionStream e = eliminate_redundant_loads(s);
  EXPECT_EQ(e, s);
  EXPECT_EQ(encode_stream(e, cfg), encode_stream(s, cfg));
  // a deserialised stream carries no plan and passes through untouched
  const InstructionStream j = stream_from_jsonl(stream_to_jsonl(s));
  EXPECT_EQ(eliminate_redundant_loads(j), j);
}

TEST(Codegen, StaticBytes) {
  AccelConfig cfg;
  InstructionStream s;
  s.insns.push_back(Instruction::load(MemKind::kWgt, 0, 0, 1, 4, 4));
  EXPECT_EQ(static_dram_bytes(s, cfg)[MemKind::kWgt], 1024);
  Instruction pad = Instruction::load(MemKind::kInp, 0, 0, 0, 0, 1);
  pad.y_pad_0 = 2;
  pad.x_pad_0 = 3;
  s.insns = {pad};
  EXPECT_EQ(static_dram_bytes(s, cfg).total(), 0);
}

TEST(Codegen, StaticBytesMatchTilingModel) {
  AccelConfig cfg;
  for (const int k : {1, 3}) {
    const ConvLayer l = layer(LayerKind::kConv, 8, 32, 32, k, k / 2, 1);
    for (const TilingParams& p : {TilingParams{1, 1, 1, 1, 1, 1, 1}, TilingParams{1, 2, 2, 2, 2, 1, 1},
                                  TilingParams{1, 2, 2, 2, 2, 2, 1}}) {
      const auto b = static_dram_bytes(gen_conv_stream(l, cfg, p), cfg);
      const auto c = dram_cost(l, cfg, p);
      EXPECT_EQ(b[MemKind::kWgt], c[1]);
      if (k == 1) {
        EXPECT_EQ(b[MemKind::kInp], c[0]);
      } else {
        EXPECT_LE(b[MemKind::kInp], c[0]);  // border pad rows are generated, not fetched
      }
    }
  }
}

TEST(Codegen, TokenValidation) {
  AccelConfig cfg;
  EXPECT_TRUE(validate_tokens(compile_layer(layer(LayerKind::kConv, 8, 32, 32, 3, 1, 1), cfg)).ok);

  InstructionStream s = gen_synthetic_gemm(cfg, 1, 1);
  s.insns[2].push_next = false;  // GEMM pops a token nobody pushes
  const auto d = validate_tokens(s);
  EXPECT_FALSE(d.ok);
  EXPECT_TRUE(d.deadlock);
  ASSERT_FALSE(d.blocked.empty());
  EXPECT_EQ(s.insns[d.blocked.front()].opcode, Opcode::kGemm);

  InstructionStream x = gen_synthetic_gemm(cfg, 1, 1);
  x.insns[1].push_next = true;  // one extra push
  const auto w = validate_tokens(x);
  EXPECT_TRUE(w.ok);
  ASSERT_FALSE(w.warnings.empty());
  EXPECT_NE(w.warnings.front().find("unconsumed token"), std::string::npos);
}

TEST(Codegen, BundledDeadlockStream) {
  const auto s = stream_from_jsonl(R"({"format":"accel-stream","version":1,"instructions":2,"uops":[[0,0,0]]}
{"opcode":"GEMM","pop_prev":true,"pop_next":false,"push_prev":false,"push_next":false,"reset":false,"uop_begin":0,"uop_end":1,"iter_out":1,"iter_in":1,"dst_factor_out":0,"dst_factor_in":0,"src_factor_out":0,"src_factor_in":0,"wgt_factor_out":0,"wgt_factor_in":0}
{"opcode":"FINISH","pop_prev":false,"pop_next":false,"push_prev":false,"push_next":false}
)");
  const auto d = validate_tokens(s);
  EXPECT_TRUE(d.deadlock);
  EXPECT_EQ(d.blocked.front(), 0u);
}

}  // namespace
}  // namespace accel
