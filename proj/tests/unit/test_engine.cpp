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
#include "fuzz.hpp"
#include "harness.hpp"

namespace accel {
namespace {

ConvLayer conv(int h, int fi, int fo, int k, int p) {
  ConvLayer l;
  l.name = "t";
  l.h = l.w = h;
  l.fi = fi;
  l.fo = fo;
  l.kh = l.kw = k;
  l.ph = l.pw = p;
  return l;
}

bool overlaps(const Interval& a, const Interval& b) { return a.start < b.end && b.start < a.end; }

bool is_load(ActivityKind k) { return k == ActivityKind::kLoadInp || k == ActivityKind::kLoadWgt; }

TEST(Engine, PulsePlans) {
  EXPECT_EQ(plan_pulses(0, 256, 128).pulses, 16);
  EXPECT_EQ(plan_pulses(0, 8, 64).pulses, 1);
  EXPECT_EQ(plan_pulses(0, 8, 64).first_mask, 0xFFu);
  EXPECT_EQ(plan_pulses(4, 8, 64).pulses, 2);
  EXPECT_EQ(plan_pulses(4, 8, 64).first_mask, 0xF0u);
  EXPECT_EQ(plan_pulses(4, 8, 64).last_mask, 0x0Fu);
  EXPECT_EQ(plan_pulses(0, 0, 64).pulses, 0);
}

TEST(Engine, WeightTilePulsesOnWideBus) {
  AccelConfig cfg;
  cfg.axi_data_bits = 128;
  InstructionStream s;
  s.insns.push_back(Instruction::load(MemKind::kWgt, 0, 0, 1, 1, 1));
  s.insns.push_back(Instruction::finish());
  const SimReport r = run(s, cfg);
  ASSERT_TRUE(r.completed);
  EXPECT_EQ(r.vme_read_pulses, 16);
  EXPECT_EQ(r.vme_requests, 1);
}

TEST(Engine, FourUopsPerPulse) {
  AccelConfig cfg;
  cfg.axi_data_bits = 128;
  InstructionStream s;
  for (std::uint32_t i = 0; i < 32; ++i) s.uops.push_back({i, i, 0});
  s.insns.push_back(Instruction::load(MemKind::kUop, 0, 0, 1, 32, 32));
  s.insns.push_back(Instruction::finish());
  const SimReport r = run(s, cfg);
  EXPECT_EQ(r.vme_max_uops_per_pulse, 4);
  EXPECT_EQ(r.vme_read_pulses, 8);
}

TEST(Engine, InflightBounded) {
  for (int i = 0; i < 50; ++i) {
    auto f = fuzz::random_stream(1000 + i);
    const SimReport r = run(f.stream, f.cfg, f.options);
    EXPECT_LE(r.vme_max_inflight, f.cfg.vme_max_inflight);
    EXPECT_GE(r.vme_max_inflight, 1);
  }
}

TEST(Engine, SeedDoesNotChangeResults) {
  AccelConfig cfg;
  std::mt19937_64 rng(21);
  const ConvLayer l = conv(8, 32, 32, 3, 1);
  const auto d = harness::random_data(l, rng);
  const auto s = compile_layer(l, cfg);
  const auto base = harness::simulate(l, cfg, s, d);
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    SimOptions o;
    o.seed = seed;
    const auto r = harness::simulate(l, cfg, s, d, o);
    EXPECT_EQ(r.output, base.output);
    EXPECT_EQ(r.report.scratch.acc, base.report.scratch.acc);
    EXPECT_EQ(r.report.scratch.inp, base.report.scratch.inp);
  }
}

TEST(Engine, Deterministic) {
  AccelConfig cfg;
  const auto s = compile_layer(conv(8, 32, 32, 3, 1), cfg);
  SimOptions o;
  o.seed = 5;
  const SimReport a = run(s, cfg, o), b = run(s, cfg, o);
  EXPECT_EQ(a.intervals, b.intervals);
  EXPECT_EQ(report_json(a), report_json(b));
  EXPECT_EQ(intervals_csv(a), intervals_csv(b));
}

TEST(Engine, Conservation) {
  AccelConfig cfg;
  for (const auto& l : {conv(8, 32, 32, 3, 1), conv(8, 16, 48, 1, 0)}) {
    const auto s = compile_layer(l, cfg);
    EXPECT_EQ(run(s, cfg).dram_bytes, static_dram_bytes(s, cfg));
  }
  for (int i = 0; i < 50; ++i) {
    auto f = fuzz::random_stream(2000 + i);
    const SimReport r = run(f.stream, f.cfg, f.options);
    ASSERT_TRUE(r.completed);
    EXPECT_EQ(r.dram_bytes, static_dram_bytes(f.stream, f.cfg));
  }
}

TEST(Engine, LatencyAndInflightMonotone) {
  const auto l = conv(8, 32, 32, 1, 0);
  for (int lat : {4, 16, 64}) {
    AccelConfig fast, slow;
    fast.dram_latency_cycles = lat;
    slow.dram_latency_cycles = lat * 2;
    const auto s = compile_layer(l, fast);
    EXPECT_LE(run(s, fast).total_cycles, run(s, slow).total_cycles);
  }
  std::int64_t prev = -1;
  for (int inflight : {1, 2, 4, 8, 16}) {
    AccelConfig cfg;
    cfg.vme_max_inflight = inflight;
    const std::int64_t c = run(compile_layer(l, cfg), cfg).total_cycles;
    if (prev >= 0) {
      EXPECT_LE(c, prev);
    }
    prev = c;
  }
}

TEST(Engine, FetchAlignment) {
  AccelConfig cfg;
  const auto s = gen_synthetic_gemm(cfg, 2, 2);
  SimOptions o;
  o.ins_base = 0x2008;
  const SimReport r = run(s, cfg, o);
  ASSERT_EQ(r.fetch_addresses.size(), s.insns.size());
  for (auto a : r.fetch_addresses) EXPECT_EQ(a % 8, 0u);
  o.ins_base = 0x2004;
  EXPECT_THROW(run(s, cfg, o), Error);
}

TEST(Engine, GemmPipelining) {
  AccelConfig one, four;
  four.gemm_ii = 4;
  const auto s = gen_synthetic_gemm(one, 8, 32);
  const double ratio = double(run(s, four).total_cycles) / run(s, one).total_cycles;
  EXPECT_GE(ratio, 3.0);
  EXPECT_LE(ratio, 4.2);
  AccelConfig a1, a4;
  a4.alu_ii_imm = 4;
  const auto t = gen_synthetic_alu(a1, 8, 32);
  EXPECT_GE(double(run(t, a4).total_cycles) / run(t, a1).total_cycles, 3.0);
}

TEST(Engine, ComputeLatency) {
  AccelConfig cfg;
  Instruction g;
  g.opcode = Opcode::kGemm;
  g.uop_begin = 0;
  g.uop_end = 2;
  g.iter_out = 3;
  g.iter_in = 4;
  EXPECT_EQ(compute_latency(g, cfg), cfg.gemm_pipeline_depth + 24);
  cfg.gemm_ii = 4;
  EXPECT_EQ(compute_latency(g, cfg), cfg.gemm_pipeline_depth + 96);
  g.opcode = Opcode::kAlu;
  g.use_imm = false;
  EXPECT_EQ(compute_latency(g, cfg), cfg.gemm_pipeline_depth + 1 + 2 * 24);
}

TEST(Engine, DeadlockDiagnosed) {
  AccelConfig cfg;
  InstructionStream s = gen_synthetic_gemm(cfg, 1, 1);
  s.insns[2].push_next = false;
  const SimReport r = run(s, cfg);
  EXPECT_FALSE(r.completed);
  ASSERT_TRUE(r.deadlock.has_value());
  EXPECT_NE(r.deadlock->find("compute instruction 3 (GEMM"), std::string::npos) << *r.deadlock;
  EXPECT_NE(r.deadlock->find("LD->CMP"), std::string::npos);
}

TEST(Engine, MaxCyclesCutsRun) {
  AccelConfig cfg;
  SimOptions o;
  o.max_cycles = 10;
  const SimReport r = run(gen_synthetic_gemm(cfg, 4, 16), cfg, o);
  EXPECT_FALSE(r.completed);
  ASSERT_TRUE(r.deadlock.has_value());
}

TEST(Engine, FuzzedStreamsHaveNoHazards) {
  for (int i = 0; i < 200; ++i) {
    auto f = fuzz::random_stream(i);
    const SimReport r = run(f.stream, f.cfg, f.options);
    ASSERT_TRUE(r.completed) << "seed " << i;
    EXPECT_TRUE(hazard_log(r).empty()) << "seed " << i;
  }
}

TEST(Engine, ExtraneousPopDeadlocks) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    auto f = fuzz::random_stream(i);
    ASSERT_TRUE(fuzz::add_extraneous_pop(f.stream, rng));
    const SimReport r = run(f.stream, f.cfg, f.options);
    EXPECT_FALSE(r.completed);
    EXPECT_TRUE(r.deadlock.has_value());
  }
}

/*! \brief Load into one INP slot, compute on it, then reload it with a missing wait. */
InstructionStream racy_stream(bool with_pop) {
  InstructionStream s;
  s.uops.push_back({0, 0, 0});
  Instruction l1 = Instruction::load(MemKind::kInp, 0, 0, 1, 1, 1);
  l1.push_next = true;
  Instruction lu = Instruction::load(MemKind::kUop, 0, 0, 1, 1, 1);
  lu.pop_prev = true;
  Instruction g;
  g.opcode = Opcode::kGemm;
  g.uop_begin = 0;
  g.uop_end = 1;
  g.iter_out = 64;
  g.iter_in = 64;
  g.push_prev = with_pop;
  Instruction l2 = Instruction::load(MemKind::kInp, 0, 8, 1, 1, 1);
  l2.pop_next = with_pop;
  s.insns = {l1, lu, g, l2, Instruction::finish()};
  return s;
}

TEST(Engine, MissingPopRaces) {
  AccelConfig cfg;
  SimOptions o;
  o.trace_accesses = true;
  const auto bad = hazard_log(run(racy_stream(false), cfg, o));
  ASSERT_FALSE(bad.empty());
  EXPECT_EQ(bad.front().region, "INP[0]");
  EXPECT_NE(bad.front().violation.find("WAR"), std::string::npos);
  const SimReport good = run(racy_stream(true), cfg, o);
  ASSERT_TRUE(good.completed);
  EXPECT_TRUE(hazard_log(good).empty());
}

/*!
 * \brief Strip the tokens of a stream and chain every module switch through a
 *  push/pop pair, so no two instructions ever run at once.
 */
InstructionStream fence_everything(InstructionStream s) {
  for (auto& x : s.insns) x.pop_prev = x.pop_next = x.push_prev = x.push_next = false;
  for (std::size_t i = 1; i < s.insns.size(); ++i) {
    Instruction& p = s.insns[i - 1];
    Instruction& x = s.insns[i];
    const Module from = p.module(), to = x.module();
    if (from == to) continue;
    const bool forward = static_cast<int>(to) > static_cast<int>(from);
    (forward ? p.push_next : p.push_prev) = true;
    (forward ? x.pop_prev : x.pop_next) = true;
  }
  return s;
}

TEST(Engine, SerialStreamIsHazardFreeAndDisjoint) {
  AccelConfig cfg;
  const ConvLayer l = conv(4, 16, 16, 1, 0);
  InstructionStream s = fence_everything(gen_conv_stream(l, cfg, TilingParams{}));
  ASSERT_EQ(validate_tokens(s).message(), "ok");
  SimOptions o;
  o.trace_accesses = true;
  const SimReport r = run(s, cfg, o);
  ASSERT_TRUE(r.completed);
  EXPECT_TRUE(hazard_log(r).empty());
  std::vector<Interval> busy;
  for (const auto& iv : r.intervals) {
    if (iv.kind != ActivityKind::kIdle && iv.kind != ActivityKind::kBlocked) busy.push_back(iv);
  }
  for (std::size_t i = 0; i < busy.size(); ++i)
    for (std::size_t j = i + 1; j < busy.size(); ++j)
      if (busy[i].process != busy[j].process) {
        EXPECT_FALSE(overlaps(busy[i], busy[j]));
      }
}

TEST(Engine, DoubleBufferingOverlapsLoadAndGemm) {
  AccelConfig cfg;
  const ConvLayer l = conv(8, 32, 32, 3, 1);
  auto overlap_count = [&](const TilingParams& p) {
    const InstructionStream s = gen_conv_stream(l, cfg, p);
    const SimReport r = run(s, cfg);
    int n = 0;
    for (const auto& a : r.intervals)
      for (const auto& b : r.intervals)
        if (is_load(a.kind) && b.kind == ActivityKind::kGemm && !s.insns[b.insn].reset &&
            overlaps(a, b))
          ++n;
    return n;
  };
  EXPECT_GT(overlap_count(TilingParams{1, 1, 1, 2, 1, 2, 1}), 0);
  EXPECT_EQ(overlap_count(TilingParams{1, 1, 1, 2, 1, 1, 1}), 0);
}

TEST(Engine, IntervalsTileTheRun) {
  AccelConfig cfg;
  const SimReport r = run(compile_layer(conv(8, 32, 32, 3, 1), cfg), cfg);
  for (Module m : {Module::kLoad, Module::kCompute, Module::kStore}) {
    std::int64_t cursor = 0;
    for (const auto& iv : r.intervals) {
      if (iv.process != m) continue;
      EXPECT_EQ(iv.start, cursor);
      EXPECT_LT(iv.start, iv.end);
      cursor = iv.end;
    }
    EXPECT_EQ(cursor, r.total_cycles);
  }
}

TEST(Engine, ReportJsonShape) {
  AccelConfig cfg;
  const SimReport r = run(gen_synthetic_gemm(cfg, 1, 1), cfg);
  const std::string j = report_json(r);
  for (const char* key : {"\"completed\"", "\"total_cycles\"", "\"dram_bytes\"", "\"intervals\"",
                          "\"token_high_water\"", "\"vme\""}) {
    EXPECT_NE(j.find(key), std::string::npos) << key;
  }
  EXPECT_EQ(intervals_csv(r).rfind("cycle_start,cycle_end,process,kind\n", 0), 0u);
}

TEST(Engine, FunctionalOutOfRangeThrows) {
  AccelConfig cfg;
  InstructionStream s;
  s.insns.push_back(Instruction::load(MemKind::kInp, 0, 100, 1, 1, 1));
  s.insns.push_back(Instruction::finish());
  SimOptions o;
  o.mode = SimMode::kFunctional;
  EXPECT_THROW(run(s, cfg, o), Error);
}

}  // namespace
}  // namespace accel
