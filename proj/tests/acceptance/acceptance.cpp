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

/*!
 * \file acceptance.cpp
 * \brief End-to-end acceptance checks. Prints one PASS/FAIL line per
 *  criterion and exits non-zero if any fails.
 */
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "accel/analysis.hpp"
#include "accel/codegen.hpp"
#include "accel/config.hpp"
#include "accel/engine.hpp"
#include "accel/floorplan.hpp"
#include "accel/tps.hpp"
#include "accel/workload.hpp"
#include "fuzz.hpp"
#include "harness.hpp"
#include "oracles.hpp"

namespace accel {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string data_path(const std::string& rel) { return std::string(ACCEL_DATA_DIR) + "/" + rel; }

/*! \brief Completed runs and how many of them conserved DRAM bytes. */
struct Conservation {
  std::int64_t runs = 0;
  std::int64_t ok = 0;
  std::string first_bad;

  void record(const SimReport& r, const InstructionStream& s, const AccelConfig& cfg,
              const std::string& what) {
    if (!r.completed) return;
    ++runs;
    if (r.dram_bytes == static_dram_bytes(s, cfg)) {
      ++ok;
    } else if (first_bad.empty()) {
      first_bad = what;
    }
  }
};

Conservation g_conservation;

SimReport tracked_run(const InstructionStream& s, const AccelConfig& cfg, const SimOptions& o,
                      const std::string& what) {
  SimReport r = run(s, cfg, o);
  g_conservation.record(r, s, cfg, what);
  return r;
}

harness::Outcome tracked_sim(const ConvLayer& l, const AccelConfig& cfg, const InstructionStream& s,
                             const harness::LayerData& d, SimOptions o, const std::string& what) {
  harness::Outcome out = harness::simulate(l, cfg, s, d, o);
  g_conservation.record(out.report, s, cfg, what);
  return out;
}

ConvLayer make_layer(LayerKind kind, int h, int fi, int fo, int k, int p, int s) {
  ConvLayer l;
  l.name = "rand";
  l.kind = kind;
  l.h = l.w = h;
  l.fi = fi;
  l.fo = fo;
  l.kh = l.kw = k;
  l.ph = l.pw = p;
  l.sh = l.sw = s;
  return l;
}

AccelConfig block_config(int batch, int block) {
  AccelConfig c;
  c.batch = batch;
  c.block_in = c.block_out = block;
  if (block < 16) c.uop_bits = 64;  // default capacities need wider indices
  c.validate();
  return c;
}

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1 ------------------------------------------------------------------------
Result tps_vs_fallback() {
  const auto t0 = Clock::now();
  const AccelConfig cfg = load_config_file(data_path("configs/block32.json"));
  const auto layers = load_workload_file(data_path("workloads/resnet18.json"));
  double worst = 1e300;
  std::string worst_layer;
  for (const ConvLayer& l0 : layers) {
    const ConvLayer l = pad_channels(l0, cfg);
    const double ratio = double(fallback_schedule(l, cfg).total_cost) / search(l, cfg).best.total_cost;
    if (ratio < worst) {
      worst = ratio;
      worst_layer = l.name;
    }
  }
  const double secs = seconds_since(t0);
  return {worst >= 10.0 && secs < 60.0 && layers.size() == 10,
          std::to_string(layers.size()) + " layers, min ratio " + fmt("%.1f", worst) + "x (" +
              worst_layer + "), " + fmt("%.2f", secs) + " s"};
}

// 2 ------------------------------------------------------------------------
Result tps_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  int compared = 0, mismatches = 0, both_infeasible = 0;
  std::string first;
  while (compared < 60) {
    AccelConfig cfg;
    cfg.batch = pick(0, 3) == 0 ? 2 : 1;
    cfg.block_in = cfg.block_out = 8 << pick(0, 2);
    cfg.c_inp = 512 << pick(0, 5);
    cfg.c_wgt = 2048 << pick(0, 5);
    cfg.c_acc = 1024 << pick(0, 5);
    cfg.c_uop = 1 << 20;
    cfg.uop_bits = 64;
    cfg.validate();
    ConvLayer l = make_layer(LayerKind::kConv, 4 << pick(0, 2), cfg.block_in * pick(1, 6),
                             cfg.block_out * pick(1, 6), 1 + 2 * pick(0, 1), 0, pick(1, 2));
    l.ph = l.pw = l.kh / 2 * pick(0, 1);
    l.w = l.h + 2 * pick(0, 1) * (l.sh == 1 ? 1 : 0);
    l.b = cfg.batch * pick(1, 2);
    const auto ref = oracle::tps_argmin(l, cfg);
    if (!ref) {
      try {
        search(l, cfg);
        ++mismatches;
        if (first.empty()) first = "search found a tiling the oracle rejects";
      } catch (const TilingError&) {
        ++both_infeasible;
      }
      continue;
    }
    ++compared;
    const TpsResult got = search(l, cfg).best;
    if (got.params.key() != ref->params || got.total_cost != ref->cost) {
      ++mismatches;
      if (first.empty()) first = got.params.to_string();
    }
  }
  const double secs = seconds_since(t0);
  std::string detail = std::to_string(compared) + " cases (+" + std::to_string(both_infeasible) +
                       " infeasible in both), " + std::to_string(mismatches) + " mismatches, " +
                       fmt("%.2f", secs) + " s";
  if (!first.empty()) detail += ", first: " + first;
  return {mismatches == 0 && compared >= 50 && secs < 120.0, detail};
}

// 3 ------------------------------------------------------------------------
/*! \brief Every load brings a chunk resident in no slot; every skipped load reads its chunk. */
bool assignment_minimal(const ConvPlan& p) {
  auto walk = [&](auto chunk, const std::vector<int>& slot, const std::vector<bool>& load) {
    std::vector<std::int64_t> resident(p.threads, -1);
    for (std::size_t k = 0; k < p.stages.size(); ++k) {
      const std::int64_t c = chunk(p.stages[k]);
      if (load[k]) {
        if (std::count(resident.begin(), resident.end(), c) != 0) return false;
        resident[slot[k]] = c;
      } else if (resident[slot[k]] != c) {
        return false;
      }
    }
    return true;
  };
  return walk([&](const ConvStage& s) { return p.inp_chunk(s); }, p.assignment.inp_slot,
              p.assignment.load_inp) &&
         walk([&](const ConvStage& s) { return p.wgt_chunk(s); }, p.assignment.wgt_slot,
              p.assignment.load_wgt);
}

Result double_buffering() {
  const AccelConfig base;
  const AccelConfig b32 = load_config_file(data_path("configs/block32.json"));
  const auto layers = load_workload_file(data_path("workloads/resnet18.json"));

  int streams = 0, not_minimal = 0;
  double shared_lo = 1e9, shared_hi = 0, combined_lo = 1e9, combined_hi = 0;
  for (const AccelConfig* cfg : {&base, &b32}) {
    for (const ConvLayer& l0 : layers) {
      const ConvLayer l = pad_channels(l0, *cfg);
      for (const bool oc_split : {true, false}) {
        SearchOptions o;
        o.oc_n = oc_split ? 2 : 1;
        o.h_n = oc_split ? 1 : 2;
        TpsResult best;
        try {
          best = search(l, *cfg, o).best;
        } catch (const TilingError&) {
          continue;  // no two-thread tiling fits
        }
        const InstructionStream s = gen_conv_stream(l, *cfg, best);
        const InstructionStream e = eliminate_redundant_loads(s);
        ++streams;
        if (!e.plan || !assignment_minimal(*e.plan)) ++not_minimal;
        if (!oc_split) continue;
        // both output-channel threads read the same input chunk
        const auto bs = static_dram_bytes(s, *cfg), be = static_dram_bytes(e, *cfg);
        const double shared = double(be[MemKind::kInp]) / bs[MemKind::kInp];
        const double combined = double(be[MemKind::kInp] + be[MemKind::kWgt]) /
                                (bs[MemKind::kInp] + bs[MemKind::kWgt]);
        shared_lo = std::min(shared_lo, shared);
        shared_hi = std::max(shared_hi, shared);
        combined_lo = std::min(combined_lo, combined);
        combined_hi = std::max(combined_hi, combined);
      }
    }
  }

  // bit-exact outputs with and without elimination on small two-thread tilings
  std::mt19937_64 rng(33);
  int functional = 0, functional_bad = 0;
  for (const AccelConfig& cfg : {base, block_config(1, 32)}) {
    for (const int k : {1, 3}) {
      const ConvLayer l = make_layer(LayerKind::kConv, 8, 2 * cfg.block_in, 2 * cfg.block_out, k, k / 2, 1);
      const auto d = harness::random_data(l, rng);
      const Tensor4 ref = harness::reference(l, cfg, d);
      for (const TilingParams& p : {TilingParams{1, 2, 2, 2, 2, 2, 1}, TilingParams{1, 4, 1, 1, 2, 1, 2},
                                    TilingParams{1, 2, 2, 2, 1, 2, 1}, TilingParams{1, 2, 1, 1, 1, 1, 2}}) {
        const InstructionStream s = gen_conv_stream(l, cfg, p);
        const InstructionStream e = eliminate_redundant_loads(s);
        ++streams;
        if (!e.plan || !assignment_minimal(*e.plan)) ++not_minimal;
        const auto a = tracked_sim(l, cfg, s, d, {}, "db naive");
        const auto b = tracked_sim(l, cfg, e, d, {}, "db eliminated");
        ++functional;
        if (!a.report.completed || !b.report.completed || a.output != ref || b.output != ref) {
          ++functional_bad;
        }
      }
    }
  }
  const bool pass = not_minimal == 0 && functional_bad == 0 && shared_lo >= 0.45 && shared_hi <= 0.55;
  return {pass, std::to_string(streams) + " streams minimal (" + std::to_string(not_minimal) +
                    " not), duplicated-operand bytes x" + fmt("%.3f", shared_lo) + ".." +
                    fmt("%.3f", shared_hi) + " (inp+wgt x" + fmt("%.3f", combined_lo) + ".." +
                    fmt("%.3f", combined_hi) + "), " + std::to_string(functional - functional_bad) +
                    "/" + std::to_string(functional) + " bit-exact"};
}

// 4 ------------------------------------------------------------------------
Result gemm_pipelining() {
  AccelConfig one, four;
  four.gemm_ii = 4;
  const auto s = gen_synthetic_gemm(one, 8, 32);
  const double gemm = double(tracked_run(s, four, {}, "gemm ii4").total_cycles) /
                      tracked_run(s, one, {}, "gemm ii1").total_cycles;
  AccelConfig a1, a4;
  a4.alu_ii_imm = 4;
  const auto t = gen_synthetic_alu(a1, 8, 32);
  const double alu = double(tracked_run(t, a4, {}, "alu ii4").total_cycles) /
                     tracked_run(t, a1, {}, "alu ii1").total_cycles;
  return {gemm >= 3.0 && gemm <= 4.2 && alu >= 3.0,
          "GEMM ratio " + fmt("%.3f", gemm) + " in [3.0, 4.2], ALU ratio " + fmt("%.3f", alu) + " >= 3.0"};
}

// 5 ------------------------------------------------------------------------
Result functional_correctness() {
  std::mt19937_64 rng(55);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const std::vector<AccelConfig> cfgs = {block_config(1, 16), block_config(1, 32), block_config(1, 8)};
  int total = 0, bad = 0;
  int per_kind[3] = {0, 0, 0};
  std::string first;
  for (int i = 0; i < 36; ++i) {
    const AccelConfig& cfg = cfgs[i % cfgs.size()];
    const int kind = (i / 3) % 3;
    const int h = 4 + 2 * pick(0, 3);
    const int k = pick(0, 1) ? 3 : (kind == 2 ? 2 : 1);
    const int s = pick(1, 2);
    const int p = kind == 2 ? 0 : k / 2 * pick(0, 1);
    ConvLayer l;
    if (kind == 0) {
      l = make_layer(LayerKind::kConv, h, 8 * pick(1, 6), 8 * pick(1, 6), k, p, s);
    } else {
      const int c = 8 * pick(1, 6);
      l = make_layer(kind == 1 ? LayerKind::kDepthwise : LayerKind::kMaxPool, h, c, c, k, p, s);
    }
    RequantOptions rq;
    if (pick(0, 1)) rq.shift = pick(0, 6);
    if (pick(0, 1)) rq.clip = 127;
    const auto d = harness::random_data(l, rng);
    const auto stream = compile_layer(l, cfg, rq);
    const auto out = tracked_sim(l, cfg, stream, d, {}, "functional " + l.name);
    ++total;
    ++per_kind[kind];
    if (!out.report.completed || out.output != harness::reference(l, cfg, d, rq)) {
      ++bad;
      if (first.empty()) {
        std::ostringstream os;
        os << "kind " << kind << " h " << h << " k " << k << " s " << s << " block " << cfg.block_in;
        first = os.str();
      }
    }
  }
  std::string detail = std::to_string(total - bad) + "/" + std::to_string(total) +
                       " bit-exact (conv " + std::to_string(per_kind[0]) + ", depthwise " +
                       std::to_string(per_kind[1]) + ", maxpool " + std::to_string(per_kind[2]) +
                       ") on (1,16,16) (1,32,32) (1,8,8)";
  if (!first.empty()) detail += ", first failure: " + first;
  return {bad == 0 && total >= 20, detail};
}

// 6 ------------------------------------------------------------------------
Result vme_pulses() {
  AccelConfig cfg;
  cfg.axi_data_bits = 128;
  InstructionStream w;
  w.insns.push_back(Instruction::load(MemKind::kWgt, 0, 0, 1, 1, 1));
  w.insns.push_back(Instruction::finish());
  const SimReport rw = tracked_run(w, cfg, {}, "wgt tile");
  InstructionStream u;
  for (std::uint32_t i = 0; i < 32; ++i) u.uops.push_back({i, i, 0});
  u.insns.push_back(Instruction::load(MemKind::kUop, 0, 0, 1, 32, 32));
  u.insns.push_back(Instruction::finish());
  const SimReport ru = tracked_run(u, cfg, {}, "uops");
  const bool pulses = rw.vme_read_pulses == 16 && ru.vme_max_uops_per_pulse == 4;

  int inflight_runs = 0, inflight_bad = 0;
  for (int i = 0; i < 200; ++i) {
    const auto f = fuzz::random_stream(50000 + i);
    const SimReport r = tracked_run(f.stream, f.cfg, f.options, "inflight fuzz");
    ++inflight_runs;
    if (r.vme_max_inflight > f.cfg.vme_max_inflight) ++inflight_bad;
  }
  const ConvLayer l = make_layer(LayerKind::kConv, 8, 32, 32, 3, 1, 1);
  for (const int inflight : {1, 2, 4, 8, 16}) {
    AccelConfig c;
    c.vme_max_inflight = inflight;
    const SimReport r = tracked_run(compile_layer(l, c), c, {}, "inflight conv");
    ++inflight_runs;
    if (r.vme_max_inflight > inflight) ++inflight_bad;
  }

  std::mt19937_64 rng(66);
  int seed_layers = 0, seed_bad = 0;
  for (const ConvLayer& sl : {l, make_layer(LayerKind::kDepthwise, 8, 32, 32, 3, 1, 1),
                              make_layer(LayerKind::kMaxPool, 8, 16, 16, 2, 0, 2)}) {
    const AccelConfig c;
    const auto d = harness::random_data(sl, rng);
    const auto s = compile_layer(sl, c);
    const auto base = tracked_sim(sl, c, s, d, {}, "seed base");
    for (std::uint64_t seed : {1ull, 7ull, 12345ull, 0xdeadbeefull}) {
      SimOptions o;
      o.seed = seed;
      const auto r = tracked_sim(sl, c, s, d, o, "seed run");
      if (!r.report.completed || r.output != base.output) ++seed_bad;
    }
    ++seed_layers;
  }
  return {pulses && inflight_bad == 0 && seed_bad == 0,
          std::to_string(rw.vme_read_pulses) + " pulses per WGT tile, " +
              std::to_string(ru.vme_max_uops_per_pulse) + " uops/pulse, inflight bound held on " +
              std::to_string(inflight_runs - inflight_bad) + "/" + std::to_string(inflight_runs) +
              " runs, " + std::to_string(seed_layers) + " layers seed-invariant (" +
              std::to_string(seed_bad) + " differ)"};
}

// 7 ------------------------------------------------------------------------
Result token_safety() {
  int clean = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto f = fuzz::random_stream(i);
    const SimReport r = tracked_run(f.stream, f.cfg, f.options, "fuzz");
    if (r.completed && hazard_log(r).empty()) ++clean;
  }
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  int built = 0, deadlocked = 0;
  for (int i = 0; i < 1000; ++i) {
    auto f = fuzz::random_stream(i);
    if (!fuzz::add_extraneous_pop(f.stream, rng)) continue;
    ++built;
    const SimReport r = run(f.stream, f.cfg, f.options);
    if (!r.completed && r.deadlock && r.deadlock->rfind("deadlock", 0) == 0) ++deadlocked;
  }
  const double secs = seconds_since(t0);
  return {clean == 1000 && built > 0 && deadlocked == built,
          std::to_string(clean) + "/1000 fuzzed streams hazard-free, " + std::to_string(deadlocked) +
              "/" + std::to_string(built) + " extraneous-pop streams diagnosed in " +
              fmt("%.2f", secs) + " s"};
}

// 8 ------------------------------------------------------------------------
Result roofline() {
  bool roof_exact = true;
  for (const int bus : {64, 128, 256, 512}) roof_exact = roof_exact && bandwidth_roof(8.0, bus) == bus;

  int points = 0, above = 0;
  const auto small = load_workload_file(data_path("workloads/small_conv.json"));
  const auto resnet = load_workload_file(data_path("workloads/resnet18.json"));
  std::vector<AccelConfig> cfgs = {AccelConfig{}, load_config_file(data_path("configs/block32.json"))};
  AccelConfig narrow;
  narrow.axi_data_bits = 256;
  cfgs.push_back(narrow);
  for (const AccelConfig& cfg : cfgs) {
    for (const auto* layers : {&small, &resnet}) {
      const WorkloadRun wr = simulate_workload(*layers, cfg, {}, true, true);
      for (const LayerRun& lr : wr.layers) {
        g_conservation.record(lr.report, lr.stream, cfg, "roofline " + lr.layer.name);
        if (lr.macs == 0) continue;
        const RooflinePoint p = roofline_point(lr.report, lr.layer, cfg);
        const double roof =
            std::min<double>(double(p.peak_ops_per_cycle), bandwidth_roof(p.ops_per_byte, cfg.axi_data_bits));
        ++points;
        if (p.ops_per_cycle > roof * (1 + 1e-12)) ++above;
      }
    }
  }
  return {roof_exact && above == 0 && points > 0,
          std::to_string(points) + " points, " + std::to_string(above) +
              " above a roof, bandwidth_roof(8, bus) == bus for 64/128/256/512: " +
              (roof_exact ? "yes" : "no")};
}

// 9 ------------------------------------------------------------------------
Result conservation() {
  return {g_conservation.runs > 0 && g_conservation.ok == g_conservation.runs,
          std::to_string(g_conservation.ok) + "/" + std::to_string(g_conservation.runs) +
              " completed runs match static_dram_bytes" +
              (g_conservation.first_bad.empty() ? "" : ", first mismatch: " + g_conservation.first_bad)};
}

// 10 -----------------------------------------------------------------------
std::array<int, 4> mat_mul(const std::array<int, 4>& a, const std::array<int, 4>& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
          a[2] * b[1] + a[3] * b[3]};
}

Result floorplan() {
  int pairs = 0, pair_bad = 0;
  for (Orient a : kAllOrients) {
    for (Orient b : kAllOrients) {
      ++pairs;
      bool ok = orient_matrix(compose(a, b)) == mat_mul(orient_matrix(a), orient_matrix(b));
      for (Orient c : kAllOrients) ok = ok && compose(compose(a, b), c) == compose(a, compose(b, c));
      ok = ok && compose(a, inverse(a)) == Orient::kR0 && compose(Orient::kR0, b) == b;
      if (!ok) ++pair_bad;
    }
  }

  int cases_bad = 0;
  {
    FpNode top = make_hierarchy("top");
    add_child(top, make_macro("a", 10, 10), 0, 0);
    add_child(top, make_macro("b", 10, 10), 5, 5);
    if (check(top, 0) != std::vector<Violation>{{ViolationKind::kOverlap, "top/a", "top/b", ""}}) ++cases_bad;
  }
  {
    FpNode top = make_hierarchy("top");
    add_child(top, make_macro("a", 10, 10), 0, 0);
    add_child(top, make_macro("b", 10, 10), 10.5, 0);
    if (check(top, 1) != std::vector<Violation>{{ViolationKind::kSpacing, "top/a", "top/b", ""}}) ++cases_bad;
    if (!check(top, 0.5).empty()) ++cases_bad;
  }
  {
    FpNode top = make_hierarchy("top");
    add_child(top, make_macro("a", 5, 5), 0, 0);
    add_child(top, make_macro("a", 5, 5), 20, 0);
    const auto v = check(top, 0);
    if (v.size() != 1 || v[0].kind != ViolationKind::kDuplicateName) ++cases_bad;
  }
  try {
    array(make_macro("mac", 4, 4), 2, 2, 5, 5, "mac_{r}");
    ++cases_bad;
  } catch (const FloorplanError&) {
  }

  std::mt19937_64 rng(1010);
  int table_bad = 0;
  for (int i = 0; i < 100; ++i) {
    const std::int64_t ax = rng() % 5000, ay = rng() % 5000, bx = rng() % 5000, by = rng() % 5000;
    const std::int64_t reach = 1 + rng() % 1500;
    const std::int64_t dist = std::llabs(ax - bx) + std::llabs(ay - by);
    const std::int64_t expect = (dist + reach - 1) / reach;
    const std::int64_t got = pipe_stages({double(ax), double(ay)}, {double(bx), double(by)}, double(reach));
    if (got != expect) ++table_bad;
  }
  return {pairs == 64 && pair_bad == 0 && cases_bad == 0 && table_bad == 0,
          std::to_string(pairs - pair_bad) + "/64 orientation pairs, " + std::to_string(cases_bad) +
              " violation cases wrong, pipe_stages " + std::to_string(100 - table_bad) + "/100"};
}

}  // namespace
}  // namespace accel

int main() {
  using accel::Result;
  struct Criterion {
    const char* name;
    std::function<Result()> fn;
  };
  // conservation runs last so it sees every simulation above
  const std::vector<Criterion> criteria = {
      {"1 tps-vs-fallback", accel::tps_vs_fallback},   {"2 tps-oracle", accel::tps_oracle},
      {"3 double-buffering", accel::double_buffering}, {"4 gemm-pipelining", accel::gemm_pipelining},
      {"5 functional", accel::functional_correctness}, {"6 vme-pulses", accel::vme_pulses},
      {"7 token-safety", accel::token_safety},         {"8 roofline", accel::roofline},
      {"10 floorplan", accel::floorplan},              {"9 conservation", accel::conservation},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Result r;
    try {
      r = c.fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    if (!r.pass) ++failed;
    std::printf("%s %-20s %s\n", r.pass ? "PASS" : "FAIL", c.name, r.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
