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

#include "accel/codegen.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>

namespace accel {

namespace {

/*! \brief Instruction waiting for its uop kernel to be placed. */
struct Pending {
  Instruction insn;
  int kernel = -1;
};

class KernelTable {
 public:
  int add(std::vector<Uop> uops) {
    auto it = index_.find(key(uops));
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(kernels_.size());
    index_.emplace(key(uops), id);
    kernels_.push_back(std::move(uops));
    return id;
  }

  /*!
   * \brief Place kernels in the uop image. Everything is loaded once up front
   *  when it fits the uop scratchpad, otherwise each kernel is reloaded at
   *  offset 0 before the first instruction that needs it.
   */
  InstructionStream finalize(const std::vector<Pending>& pending, const AccelConfig& cfg) const {
    InstructionStream s;
    std::vector<std::uint32_t> offset;
    for (const auto& k : kernels_) {
      offset.push_back(static_cast<std::uint32_t>(s.uops.size()));
      s.uops.insert(s.uops.end(), k.begin(), k.end());
    }
    const std::int64_t entries = cfg.entries(MemKind::kUop);
    const bool preload = static_cast<std::int64_t>(s.uops.size()) <= entries;
    auto uop_load = [](std::uint32_t dram, std::uint32_t n) {
      Instruction in = Instruction::load(MemKind::kUop, 0, dram, 1, n, n);
      return in;
    };
    if (preload && !s.uops.empty()) {
      s.insns.push_back(uop_load(0, static_cast<std::uint32_t>(s.uops.size())));
    }
    int resident = -1;
    for (const Pending& p : pending) {
      Instruction in = p.insn;
      if (p.kernel >= 0) {
        const auto n = static_cast<std::uint32_t>(kernels_[p.kernel].size());
        if (preload) {
          in.uop_begin = offset[p.kernel];
          in.uop_end = offset[p.kernel] + n;
        } else {
          if (static_cast<std::int64_t>(n) > entries) {
            throw CodegenError("uop kernel of " + std::to_string(n) +
                               " uops exceeds the uop scratchpad (" + std::to_string(entries) +
                               " entries)");
          }
          if (resident != p.kernel) {
            s.insns.push_back(uop_load(offset[p.kernel], n));
            resident = p.kernel;
          }
          in.uop_begin = 0;
          in.uop_end = n;
        }
      }
      s.insns.push_back(in);
    }
    return s;
  }

 private:
  static std::vector<std::uint32_t> key(const std::vector<Uop>& uops) {
    std::vector<std::uint32_t> k;
    k.reserve(uops.size() * 3);
    for (const Uop& u : uops) {
      k.push_back(u.acc_idx);
      k.push_back(u.inp_idx);
      k.push_back(u.wgt_idx);
    }
    return k;
  }

  std::vector<std::vector<Uop>> kernels_;
  std::map<std::vector<std::uint32_t>, int> index_;
};

struct Window {
  std::uint32_t size = 0;
  std::uint32_t pad_lo = 0;
  std::uint32_t pad_hi = 0;
  int first = 0;  // first in-range coordinate when size > 0
};

// Split [start, start + len) against [0, extent) into pad / data / pad.
Window clip_window(int start, int len, int extent) {
  Window w;
  const int lo = std::clamp(-start, 0, len);
  const int hi = std::clamp(start + len - extent, 0, len - lo);
  const int size = len - lo - hi;
  if (size <= 0) {
    w.pad_lo = static_cast<std::uint32_t>(len);
    return w;
  }
  w.size = static_cast<std::uint32_t>(size);
  w.pad_lo = static_cast<std::uint32_t>(lo);
  w.pad_hi = static_cast<std::uint32_t>(hi);
  w.first = start + lo;
  return w;
}

void check_pad(const Window& w, const AccelConfig& cfg) {
  const std::uint32_t limit = (1U << cfg.pad_bits) - 1;
  if (w.pad_lo > limit || w.pad_hi > limit) {
    throw CodegenError("padding of " + std::to_string(std::max(w.pad_lo, w.pad_hi)) +
                       " entries exceeds the " + std::to_string(cfg.pad_bits) + "-bit pad field");
  }
}

Instruction padded_load(MemKind kind, std::uint32_t sram, std::int64_t plane_base, int w,
                        const Window& wy, const Window& wx, PadKind pad, const AccelConfig& cfg) {
  check_pad(wy, cfg);
  check_pad(wx, cfg);
  Instruction in = Instruction::load(kind, sram, 0, wy.size, wx.size, static_cast<std::uint32_t>(w));
  if (wy.size == 0 || wx.size == 0) {
    // Nothing comes from DRAM; the whole window is pad.
    const std::uint32_t rows = wy.size + wy.pad_lo + wy.pad_hi;
    const std::uint32_t cols = wx.size + wx.pad_lo + wx.pad_hi;
    in.y_size = 0;
    in.x_size = 0;
    in.y_pad_0 = rows;
    in.x_pad_0 = cols;
    check_pad({0, rows, 0, 0}, cfg);
    check_pad({0, cols, 0, 0}, cfg);
  } else {
    in.dram_base = static_cast<std::uint64_t>((plane_base + wy.first) * w + wx.first);
    in.y_pad_0 = wy.pad_lo;
    in.y_pad_1 = wy.pad_hi;
    in.x_pad_0 = wx.pad_lo;
    in.x_pad_1 = wx.pad_hi;
  }
  in.pad_kind = pad;
  return in;
}

std::optional<std::string> footprint_problem(const ConvPlan& p) {
  const std::int64_t t = p.threads;
  const struct {
    const char* name;
    std::int64_t need;
    MemKind kind;
  } checks[] = {
      {"INP", t * p.inp_slot_entries(), MemKind::kInp},
      {"WGT", t * p.wgt_slot_entries(), MemKind::kWgt},
      {"ACC", t * p.acc_slot_entries(), MemKind::kAcc},
  };
  for (const auto& c : checks) {
    const std::int64_t have = p.cfg.entries(c.kind);
    if (c.need > have) {
      return std::string("tiling does not fit ") + c.name + " scratchpad: needs " +
             std::to_string(c.need) + " entries, has " + std::to_string(have);
    }
  }
  return std::nullopt;
}

ConvPlan make_plan(const ConvLayer& layer, const AccelConfig& cfg, const TilingParams& params,
                   const RequantOptions& requant) {
  cfg.validate();
  if (layer.kind != LayerKind::kConv && layer.kind != LayerKind::kDense) {
    throw CodegenError(std::string(to_string(layer.kind)) + " layers are lowered on the ALU");
  }
  ConvPlan p;
  p.layer = pad_channels(layer, cfg);
  p.cfg = cfg;
  p.params = params;
  p.requant = requant;
  p.dims = tile_dims(p.layer, cfg);
  if (auto why = check_params(p.layer, cfg, params)) {
    throw TilingError(params.to_string() + ": " + *why);
  }
  p.inner = inner_tile(p.dims, params);
  p.threads = params.oc_n * params.h_n;
  p.hwin = (p.inner.th_i - 1) * p.layer.sh + p.layer.kh;
  p.wwin = (p.inner.tw_i - 1) * p.layer.sw + p.layer.kw;
  const TilingParams& t = params;
  for (int tb = 0; tb < t.tb_o; ++tb)
    for (int cp = 0; cp < t.tco_o / t.oc_n; ++cp)
      for (int hp = 0; hp < t.th_o / t.h_n; ++hp)
        for (int tw = 0; tw < t.tw_o; ++tw)
          for (int tci = 0; tci < t.tci_o; ++tci)
            for (int ctx = 0; ctx < p.threads; ++ctx) {
              ConvStage s;
              s.ctx = ctx;
              s.tb = tb;
              s.tco = cp * t.oc_n + (t.oc_n == 2 ? ctx : 0);
              s.th = hp * t.h_n + (t.h_n == 2 ? ctx : 0);
              s.tw = tw;
              s.tci = tci;
              s.first = tci == 0;
              s.last = tci == t.tci_o - 1;
              p.stages.push_back(s);
            }
  SlotAssignment& a = p.assignment;
  for (const ConvStage& s : p.stages) {
    a.inp_slot.push_back(s.ctx);
    a.wgt_slot.push_back(s.ctx);
    a.load_inp.push_back(true);
    a.load_wgt.push_back(true);
  }
  return p;
}

SlotAssignment reuse_assignment(const ConvPlan& p) {
  SlotAssignment a;
  const std::size_t n = p.stages.size();
  a.inp_slot.resize(n);
  a.wgt_slot.resize(n);
  a.load_inp.resize(n);
  a.load_wgt.resize(n);
  auto walk = [&](auto chunk_of, std::vector<int>& slot, std::vector<bool>& load) {
    std::vector<std::int64_t> resident(p.threads, -1);
    int prev = -1;
    for (std::size_t k = 0; k < n; ++k) {
      const std::int64_t key = chunk_of(p.stages[k]);
      auto it = std::find(resident.begin(), resident.end(), key);
      int s;
      if (it != resident.end()) {
        s = static_cast<int>(it - resident.begin());
        load[k] = false;
      } else {
        // Fill the half the previous stage did not read so the load overlaps its compute.
        s = (p.threads == 1 || prev < 0) ? 0 : 1 - prev;
        resident[s] = key;
        load[k] = true;
      }
      slot[k] = s;
      prev = s;
    }
  };
  walk([&](const ConvStage& s) { return p.inp_chunk(s); }, a.inp_slot, a.load_inp);
  walk([&](const ConvStage& s) { return p.wgt_chunk(s); }, a.wgt_slot, a.load_wgt);
  return a;
}

InstructionStream lower_conv(const ConvPlan& p) {
  if (auto why = footprint_problem(p)) throw CodegenError(*why);
  const ConvLayer& L = p.layer;
  const AccelConfig& cfg = p.cfg;
  const TileDims& d = p.dims;
  const InnerTile& in = p.inner;
  const SlotAssignment& a = p.assignment;
  const std::size_t n = p.stages.size();
  const int kk = L.kh * L.kw;
  const OutputDims od = output_dims(L);

  // Pass 1: decide which stages pop and which push on the reverse queues.
  std::vector<bool> pop_cmp_ld(n), push_cmp_ld(n), pop_st_cmp(n), push_st_cmp(n);
  bool finish_pops = false;
  {
    std::vector<int> last_inp_reader(p.threads, -1), last_wgt_reader(p.threads, -1);
    std::vector<int> last_store(p.threads, -1);
    int ld_waited = -1, st_waited = -1;
    for (std::size_t k = 0; k < n; ++k) {
      int target = -1;
      if (a.load_inp[k]) target = std::max(target, last_inp_reader[a.inp_slot[k]]);
      if (a.load_wgt[k]) target = std::max(target, last_wgt_reader[a.wgt_slot[k]]);
      if (target > ld_waited) {
        pop_cmp_ld[k] = true;
        push_cmp_ld[target] = true;
        ld_waited = target;
      }
      last_inp_reader[a.inp_slot[k]] = static_cast<int>(k);
      last_wgt_reader[a.wgt_slot[k]] = static_cast<int>(k);
      const ConvStage& s = p.stages[k];
      if (s.first) {
        const int t = last_store[s.ctx];
        if (t > st_waited) {
          pop_st_cmp[k] = true;
          push_st_cmp[t] = true;
          st_waited = t;
        }
      }
      if (s.last) last_store[s.ctx] = static_cast<int>(k);
    }
    const int t = *std::max_element(last_store.begin(), last_store.end());
    if (t > st_waited) {
      finish_pops = true;
      push_st_cmp[t] = true;
    }
  }

  // Pass 2: emit.
  KernelTable kernels;
  std::vector<Pending> out;
  const auto inp_base = [&](int slot) { return static_cast<std::uint32_t>(slot * p.inp_slot_entries()); };
  const auto wgt_base = [&](int slot) { return static_cast<std::uint32_t>(slot * p.wgt_slot_entries()); };
  const auto acc_base = [&](int slot) { return static_cast<std::uint32_t>(slot * p.acc_slot_entries()); };
  const std::uint32_t plane = static_cast<std::uint32_t>(in.th_i * in.tw_i);

  auto tile_loop = [&](Instruction& g) {
    g.iter_out = static_cast<std::uint32_t>(in.th_i);
    g.iter_in = static_cast<std::uint32_t>(in.tw_i);
    g.dst_factor_out = static_cast<std::uint32_t>(in.tw_i);
    g.dst_factor_in = 1;
  };
  auto acc_uops = [&](int ctx) {
    std::vector<Uop> u;
    for (int nb = 0; nb < in.tb_i; ++nb)
      for (int co = 0; co < in.tco_i; ++co)
        u.push_back({acc_base(ctx) + static_cast<std::uint32_t>(nb * in.tco_i + co) * plane, 0, 0});
    return u;
  };

  for (std::size_t k = 0; k < n; ++k) {
    const ConvStage& s = p.stages[k];
    // Load group.
    std::vector<Instruction> group;
    if (a.load_inp[k]) {
      const int oy0 = s.th * in.th_i, ox0 = s.tw * in.tw_i;
      const Window wy = clip_window(oy0 * L.sh - L.ph, p.hwin, L.h);
      const Window wx = clip_window(ox0 * L.sw - L.pw, p.wwin, L.w);
      for (int nb_i = 0; nb_i < in.tb_i; ++nb_i) {
        for (int ci_i = 0; ci_i < in.tci_i; ++ci_i) {
          const std::int64_t nb = static_cast<std::int64_t>(s.tb) * in.tb_i + nb_i;
          const std::int64_t ci = static_cast<std::int64_t>(s.tci) * in.tci_i + ci_i;
          const auto sram = inp_base(a.inp_slot[k]) +
                            static_cast<std::uint32_t>((nb_i * in.tci_i + ci_i) * p.hwin * p.wwin);
          group.push_back(padded_load(MemKind::kInp, sram, (nb * d.di + ci) * L.h, L.w, wy,
                                      wx, PadKind::kZero, cfg));
        }
      }
    }
    if (a.load_wgt[k]) {
      const std::int64_t co0 = static_cast<std::int64_t>(s.tco) * in.tco_i;
      const std::int64_t ci0 = static_cast<std::int64_t>(s.tci) * in.tci_i;
      group.push_back(Instruction::load(MemKind::kWgt, wgt_base(a.wgt_slot[k]),
                                        static_cast<std::uint64_t>((co0 * d.di + ci0) * kk),
                                        static_cast<std::uint32_t>(in.tco_i),
                                        static_cast<std::uint32_t>(in.tci_i * kk),
                                        static_cast<std::uint32_t>(d.di * kk)));
    }
    if (!group.empty()) {
      group.front().pop_next = pop_cmp_ld[k];
      group.back().push_next = true;
      for (auto& g : group) out.push_back({g, -1});
    }

    // Compute.
    if (s.first) {
      Instruction g;
      g.opcode = Opcode::kGemm;
      g.reset = true;
      tile_loop(g);
      g.pop_next = pop_st_cmp[k];
      out.push_back({g, kernels.add(acc_uops(s.ctx))});
    }
    {
      Instruction g;
      g.opcode = Opcode::kGemm;
      tile_loop(g);
      g.src_factor_out = static_cast<std::uint32_t>(L.sh * p.wwin);
      g.src_factor_in = static_cast<std::uint32_t>(L.sw);
      g.pop_prev = !group.empty();
      g.push_prev = push_cmp_ld[k];
      std::vector<Uop> u;
      for (int nb = 0; nb < in.tb_i; ++nb)
        for (int co = 0; co < in.tco_i; ++co)
          for (int ci = 0; ci < in.tci_i; ++ci)
            for (int ky = 0; ky < L.kh; ++ky)
              for (int kx = 0; kx < L.kw; ++kx) {
                Uop x;
                x.acc_idx = acc_base(s.ctx) + static_cast<std::uint32_t>(nb * in.tco_i + co) * plane;
                x.inp_idx = inp_base(a.inp_slot[k]) +
                            static_cast<std::uint32_t>((nb * in.tci_i + ci) * p.hwin * p.wwin +
                                                       ky * p.wwin + kx);
                x.wgt_idx = wgt_base(a.wgt_slot[k]) +
                            static_cast<std::uint32_t>((co * in.tci_i + ci) * kk + ky * L.kw + kx);
                u.push_back(x);
              }
      out.push_back({g, kernels.add(std::move(u))});
    }
    if (!s.last) continue;

    // Requantise and store.
    auto alu_imm = [&](AluOp op, int imm) {
      Instruction g;
      g.opcode = Opcode::kAlu;
      g.alu_op = op;
      g.use_imm = true;
      g.imm = imm;
      tile_loop(g);
      g.src_factor_out = g.dst_factor_out;
      g.src_factor_in = g.dst_factor_in;
      std::vector<Uop> u = acc_uops(s.ctx);
      for (Uop& x : u) x.inp_idx = x.acc_idx;
      out.push_back({g, kernels.add(std::move(u))});
    };
    if (p.requant.shift) alu_imm(AluOp::kShr, *p.requant.shift);
    if (p.requant.clip) alu_imm(AluOp::kClip, *p.requant.clip);
    out.back().insn.push_next = true;

    const std::size_t first_store = out.size();
    for (int nb_i = 0; nb_i < in.tb_i; ++nb_i) {
      for (int co_i = 0; co_i < in.tco_i; ++co_i) {
        const std::int64_t nb = static_cast<std::int64_t>(s.tb) * in.tb_i + nb_i;
        const std::int64_t co = static_cast<std::int64_t>(s.tco) * in.tco_i + co_i;
        const std::int64_t oy0 = static_cast<std::int64_t>(s.th) * in.th_i;
        const std::int64_t ox0 = static_cast<std::int64_t>(s.tw) * in.tw_i;
        const auto sram = acc_base(s.ctx) + static_cast<std::uint32_t>(nb_i * in.tco_i + co_i) * plane;
        const auto dram = static_cast<std::uint64_t>(((nb * d.do_ + co) * od.oh + oy0) * od.ow + ox0);
        out.push_back({Instruction::store(sram, dram, static_cast<std::uint32_t>(in.th_i),
                                          static_cast<std::uint32_t>(in.tw_i),
                                          static_cast<std::uint32_t>(od.ow)),
                       -1});
      }
    }
    out[first_store].insn.pop_prev = true;
    out.back().insn.push_prev = push_st_cmp[k];
  }
  Instruction fin = Instruction::finish();
  fin.pop_next = finish_pops;
  out.push_back({fin, -1});

  InstructionStream stream = kernels.finalize(out, cfg);
  check_stream_fits(stream, cfg);
  stream.plan = std::make_shared<const ConvPlan>(p);
  return stream;
}

}  // namespace

std::int64_t ConvPlan::inp_slot_entries() const {
  return static_cast<std::int64_t>(inner.tb_i) * inner.tci_i * hwin * wwin;
}

std::int64_t ConvPlan::wgt_slot_entries() const {
  return static_cast<std::int64_t>(inner.tco_i) * inner.tci_i * layer.kh * layer.kw;
}

std::int64_t ConvPlan::acc_slot_entries() const {
  return static_cast<std::int64_t>(inner.tb_i) * inner.tco_i * inner.th_i * inner.tw_i;
}

std::int64_t ConvPlan::inp_chunk(const ConvStage& s) const {
  return ((static_cast<std::int64_t>(s.tb) * params.th_o + s.th) * params.tw_o + s.tw) *
             params.tci_o +
         s.tci;
}

std::int64_t ConvPlan::wgt_chunk(const ConvStage& s) const {
  return static_cast<std::int64_t>(s.tco) * params.tci_o + s.tci;
}

InstructionStream gen_conv_stream(const ConvLayer& layer, const AccelConfig& cfg,
                                  const TilingParams& params, const RequantOptions& requant) {
  return lower_conv(make_plan(layer, cfg, params, requant));
}

InstructionStream gen_conv_stream(const ConvLayer& layer, const AccelConfig& cfg,
                                  const TpsResult& tiling, const RequantOptions& requant) {
  if (!tiling.feasible) throw TilingError("infeasible tiling " + tiling.params.to_string());
  return gen_conv_stream(layer, cfg, tiling.params, requant);
}

InstructionStream compile_conv(const ConvLayer& layer, const AccelConfig& cfg,
                               const RequantOptions& requant, const SearchOptions& search_options,
                               TpsResult* chosen) {
  const ConvLayer padded = pad_channels(layer, cfg);
  SearchOptions opts = search_options;
  opts.keep_ranking = true;
  const SearchOutcome outcome = search(padded, cfg, opts);
  std::string first_problem;
  for (const TpsResult& r : outcome.ranking) {
    ConvPlan plan = make_plan(layer, cfg, r.params, requant);
    if (auto why = footprint_problem(plan)) {
      if (first_problem.empty()) first_problem = *why;
      continue;
    }
    if (chosen) *chosen = r;
    return lower_conv(plan);
  }
  throw CodegenError("no searched tiling fits the scratchpads" +
                     (first_problem.empty() ? std::string() : " (" + first_problem + ")"));
}

InstructionStream compile_layer(const ConvLayer& layer, const AccelConfig& cfg,
                                const RequantOptions& requant) {
  if (layer.uses_alu()) return gen_alu_layer_stream(layer, cfg, requant);
  return compile_conv(layer, cfg, requant);
}

InstructionStream gen_alu_layer_stream(const ConvLayer& layer, const AccelConfig& cfg,
                                       const RequantOptions& requant) {
  cfg.validate();
  if (!layer.uses_alu()) {
    throw CodegenError(std::string("unsupported layer kind for the ALU: ") +
                       std::string(to_string(layer.kind)));
  }
  const ConvLayer L = pad_channels(layer, cfg);
  L.validate();
  if (L.b % cfg.batch != 0) {
    throw CodegenError("b=" + std::to_string(L.b) + " is not a multiple of batch=" +
                       std::to_string(cfg.batch));
  }
  const int kk = L.kh * L.kw;
  int avg_shift = 0;
  if (L.kind == LayerKind::kAvgPool) {
    if (!is_pow2(static_cast<std::uint64_t>(kk))) {
      throw CodegenError("avgpool window of " + std::to_string(kk) +
                         " taps is not a power of 2");
    }
    avg_shift = ceil_log2(static_cast<std::uint64_t>(kk));
  }
  const bool dw = L.kind == LayerKind::kDepthwise;
  const OutputDims od = output_dims(L);
  const int nb_total = L.b / cfg.batch;
  const int channels = L.fo / cfg.block_out;
  const int wwin = (od.ow - 1) * L.sw + L.kw;
  const std::int64_t entries = cfg.entries(MemKind::kAcc);
  const std::int64_t weight_offset = static_cast<std::int64_t>(nb_total) * channels * L.h * L.w;

  auto footprint = [&](int cg, int rows) {
    const std::int64_t hwin = static_cast<std::int64_t>(rows - 1) * L.sh + L.kh;
    std::int64_t f = cg * hwin * wwin + static_cast<std::int64_t>(cg) * rows * od.ow;
    if (dw) f += static_cast<std::int64_t>(cg) * kk + static_cast<std::int64_t>(cg) * rows * od.ow;
    return f;
  };
  int cg = channels, rows = 0;
  for (; cg >= 1; --cg) {
    for (rows = od.oh; rows >= 1 && footprint(cg, rows) > entries; --rows) {
    }
    if (rows >= 1) break;
  }
  if (cg < 1) {
    throw CodegenError("tiling does not fit ACC scratchpad: one output row needs " +
                       std::to_string(footprint(1, 1)) + " entries, has " +
                       std::to_string(entries));
  }
  const std::int64_t hwin_max = static_cast<std::int64_t>(rows - 1) * L.sh + L.kh;
  const auto i_base = std::uint32_t{0};
  const auto o_base = static_cast<std::uint32_t>(cg * hwin_max * wwin);
  const auto t_base = static_cast<std::uint32_t>(o_base + static_cast<std::int64_t>(cg) * rows * od.ow);
  const auto w_base = static_cast<std::uint32_t>(t_base + static_cast<std::int64_t>(cg) * rows * od.ow);

  KernelTable kernels;
  std::vector<Pending> out;
  bool have_prev_store = false;
  const PadKind pad = L.kind == LayerKind::kMaxPool ? PadKind::kMinValue : PadKind::kZero;

  for (int nb = 0; nb < nb_total; ++nb) {
    for (int c0 = 0; c0 < channels; c0 += cg) {
      const int cgs = std::min(cg, channels - c0);
      for (int r0 = 0; r0 < od.oh; r0 += rows) {
        const int rs = std::min(rows, od.oh - r0);
        const int hwin = (rs - 1) * L.sh + L.kh;
        const auto plane = static_cast<std::uint32_t>(rs * od.ow);
        const Window wy = clip_window(r0 * L.sh - L.ph, hwin, L.h);
        const Window wx = clip_window(-L.pw, wwin, L.w);
        for (int c = 0; c < cgs; ++c) {
          const auto sram = i_base + static_cast<std::uint32_t>(c * hwin * wwin);
          const std::int64_t plane_base = (static_cast<std::int64_t>(nb) * channels + c0 + c) * L.h;
          out.push_back({padded_load(MemKind::kAcc, sram, plane_base, L.w, wy, wx, pad, cfg), -1});
        }
        if (dw) {
          out.push_back({Instruction::load(MemKind::kAcc, w_base,
                                           static_cast<std::uint64_t>(weight_offset + static_cast<std::int64_t>(c0) * kk),
                                           static_cast<std::uint32_t>(cgs),
                                           static_cast<std::uint32_t>(kk),
                                           static_cast<std::uint32_t>(kk)),
                         -1});
        }
        auto region_uops = [&](std::uint32_t dst, std::uint32_t dst_stride, std::uint32_t src,
                               std::uint32_t src_stride) {
          std::vector<Uop> u;
          for (int c = 0; c < cgs; ++c) {
            u.push_back({dst + static_cast<std::uint32_t>(c) * dst_stride,
                         src + static_cast<std::uint32_t>(c) * src_stride, 0});
          }
          return u;
        };
        auto loops = [&](Instruction& g) {
          g.iter_out = static_cast<std::uint32_t>(rs);
          g.iter_in = static_cast<std::uint32_t>(od.ow);
          g.dst_factor_out = static_cast<std::uint32_t>(od.ow);
          g.dst_factor_in = 1;
        };
        auto reset = [&](std::uint32_t base, bool pop) {
          Instruction g;
          g.opcode = Opcode::kGemm;
          g.reset = true;
          g.pop_next = pop;
          loops(g);
          out.push_back({g, kernels.add(region_uops(base, plane, 0, 0))});
        };
        // src is either a window tap of I, a weight tile, or a same-shape region.
        auto alu = [&](AluOp op, std::vector<Uop> u, std::uint32_t sfo, std::uint32_t sfi) {
          Instruction g;
          g.opcode = Opcode::kAlu;
          g.alu_op = op;
          loops(g);
          g.src_factor_out = sfo;
          g.src_factor_in = sfi;
          out.push_back({g, kernels.add(std::move(u))});
        };
        auto tap_uops = [&](std::uint32_t dst, int ky, int kx) {
          return region_uops(dst, plane, i_base + static_cast<std::uint32_t>(ky * wwin + kx),
                             static_cast<std::uint32_t>(hwin * wwin));
        };
        const auto tap_fo = static_cast<std::uint32_t>(L.sh * wwin);
        const auto tap_fi = static_cast<std::uint32_t>(L.sw);

        reset(o_base, have_prev_store);
        for (int ky = 0; ky < L.kh; ++ky) {
          for (int kx = 0; kx < L.kw; ++kx) {
            const int t = ky * L.kw + kx;
            if (dw) {
              reset(t_base, false);
              alu(AluOp::kAdd, tap_uops(t_base, ky, kx), tap_fo, tap_fi);
              alu(AluOp::kMul,
                  region_uops(t_base, plane, w_base + static_cast<std::uint32_t>(t),
                              static_cast<std::uint32_t>(kk)),
                  0, 0);
              alu(AluOp::kAdd, region_uops(o_base, plane, t_base, plane),
                  static_cast<std::uint32_t>(od.ow), 1);
            } else if (L.kind == LayerKind::kMaxPool && t > 0) {
              alu(AluOp::kMax, tap_uops(o_base, ky, kx), tap_fo, tap_fi);
            } else {
              alu(AluOp::kAdd, tap_uops(o_base, ky, kx), tap_fo, tap_fi);
            }
          }
        }
        auto alu_imm = [&](AluOp op, int imm) {
          Instruction g;
          g.opcode = Opcode::kAlu;
          g.alu_op = op;
          g.use_imm = true;
          g.imm = imm;
          loops(g);
          g.src_factor_out = g.dst_factor_out;
          g.src_factor_in = 1;
          out.push_back({g, kernels.add(region_uops(o_base, plane, o_base, plane))});
        };
        if (avg_shift > 0) alu_imm(AluOp::kShr, avg_shift);
        if (requant.shift) alu_imm(AluOp::kShr, *requant.shift);
        if (requant.clip) alu_imm(AluOp::kClip, *requant.clip);
        out.back().insn.push_next = true;

        const std::size_t first_store = out.size();
        for (int c = 0; c < cgs; ++c) {
          const std::int64_t dram =
              ((static_cast<std::int64_t>(nb) * channels + c0 + c) * od.oh + r0) * od.ow;
          out.push_back({Instruction::store(o_base + static_cast<std::uint32_t>(c) * plane,
                                            static_cast<std::uint64_t>(dram),
                                            static_cast<std::uint32_t>(rs),
                                            static_cast<std::uint32_t>(od.ow),
                                            static_cast<std::uint32_t>(od.ow)),
                         -1});
        }
        out[first_store].insn.pop_prev = true;
        out.back().insn.push_prev = true;
        have_prev_store = true;
      }
    }
  }
  Instruction fin = Instruction::finish();
  fin.pop_next = have_prev_store;
  out.push_back({fin, -1});
  InstructionStream stream = kernels.finalize(out, cfg);
  check_stream_fits(stream, cfg);
  return stream;
}

std::int64_t count_chunk_loads(const SlotAssignment& a) {
  return std::count(a.load_inp.begin(), a.load_inp.end(), true) +
         std::count(a.load_wgt.begin(), a.load_wgt.end(), true);
}

InstructionStream eliminate_redundant_loads(const InstructionStream& stream) {
  if (!stream.plan) return stream;
  ConvPlan plan = *stream.plan;
  SlotAssignment reuse = reuse_assignment(plan);
  if (count_chunk_loads(reuse) >= count_chunk_loads(plan.assignment)) return stream;
  plan.assignment = std::move(reuse);
  return lower_conv(plan);
}

std::int64_t DramBytes::read() const {
  std::int64_t sum = 0;
  for (MemKind k : {MemKind::kInp, MemKind::kWgt, MemKind::kAcc, MemKind::kUop}) {
    sum += by_kind[static_cast<int>(k)];
  }
  return sum;
}

DramBytes static_dram_bytes(const InstructionStream& stream, const AccelConfig& cfg) {
  DramBytes b;
  for (const Instruction& in : stream.insns) {
    if (!in.is_mem()) continue;
    const std::int64_t tile = in.mem_kind == MemKind::kUop ? cfg.uop_bits / 8
                                                           : tensor_bytes(cfg, in.mem_kind);
    b.by_kind[static_cast<int>(in.mem_kind)] +=
        static_cast<std::int64_t>(in.y_size) * in.x_size * tile;
  }
  return b;
}

std::string TokenDiagnosis::message() const {
  std::ostringstream os;
  if (ok && warnings.empty()) return "ok";
  for (const auto& e : errors) os << "error: " << e << '\n';
  for (const auto& w : warnings) os << "warning: " << w << '\n';
  std::string s = os.str();
  if (!s.empty()) s.pop_back();
  return s;
}

TokenDiagnosis validate_tokens(const InstructionStream& stream) {
  TokenDiagnosis d;
  const auto& insns = stream.insns;
  std::array<std::int64_t, kNumDepQueues> pushes{}, pops{};
  std::size_t finishes = 0;
  for (std::size_t i = 0; i < insns.size(); ++i) {
    const Instruction& in = insns[i];
    if (in.opcode == Opcode::kFinish) {
      ++finishes;
      if (i + 1 != insns.size()) d.errors.push_back("FINISH at instruction " + std::to_string(i) + " is not last");
    }
    if (in.opcode == Opcode::kLoad && in.mem_kind == MemKind::kOut) {
      d.errors.push_back("instruction " + std::to_string(i) + " loads OUT");
    }
    if (in.opcode == Opcode::kStore && in.mem_kind != MemKind::kOut) {
      d.errors.push_back("instruction " + std::to_string(i) + " stores a non-OUT kind");
    }
    const struct {
      bool set;
      int q;
      const char* name;
      bool push;
    } bits[] = {
        {in.pop_prev, in.pop_prev_queue(), "pop_prev", false},
        {in.pop_next, in.pop_next_queue(), "pop_next", false},
        {in.push_prev, in.push_prev_queue(), "push_prev", true},
        {in.push_next, in.push_next_queue(), "push_next", true},
    };
    for (const auto& b : bits) {
      if (!b.set) continue;
      if (b.q < 0) {
        d.errors.push_back("instruction " + std::to_string(i) + " (" +
                           std::string(to_string(in.module())) + ") sets " + b.name +
                           " with no queue in that direction");
        continue;
      }
      (b.push ? pushes : pops)[b.q]++;
    }
  }
  if (finishes != 1) d.errors.push_back("stream has " + std::to_string(finishes) + " FINISH instructions");
  for (int q = 0; q < kNumDepQueues; ++q) {
    const std::string name(to_string(static_cast<DepQueue>(q)));
    if (pops[q] > pushes[q]) {
      d.errors.push_back("queue " + name + ": " + std::to_string(pops[q]) + " pops but only " +
                         std::to_string(pushes[q]) + " pushes");
    } else if (pushes[q] > pops[q]) {
      d.warnings.push_back("unconsumed token on " + name + ": " + std::to_string(pushes[q]) +
                           " pushes, " + std::to_string(pops[q]) + " pops");
    }
  }

  // Untimed run: each module executes in order once its pops are available.
  std::array<std::deque<std::size_t>, 3> queue;
  for (std::size_t i = 0; i < insns.size(); ++i) queue[static_cast<int>(insns[i].module())].push_back(i);
  std::array<std::int64_t, kNumDepQueues> tokens{};
  bool progress = true;
  while (progress) {
    progress = false;
    for (auto& q : queue) {
      while (!q.empty()) {
        const Instruction& in = insns[q.front()];
        const int pp = in.pop_prev ? in.pop_prev_queue() : -1;
        const int pn = in.pop_next ? in.pop_next_queue() : -1;
        if ((pp >= 0 && tokens[pp] == 0) || (pn >= 0 && tokens[pn] == 0)) break;
        if (pp >= 0) --tokens[pp];
        if (pn >= 0) --tokens[pn];
        if (in.push_prev && in.push_prev_queue() >= 0) ++tokens[in.push_prev_queue()];
        if (in.push_next && in.push_next_queue() >= 0) ++tokens[in.push_next_queue()];
        q.pop_front();
        progress = true;
      }
    }
  }
  for (auto& q : queue) {
    if (q.empty()) continue;
    d.deadlock = true;
    const std::size_t i = q.front();
    const Instruction& in = insns[i];
    d.blocked.push_back(i);
    std::string waits;
    if (in.pop_prev && tokens[in.pop_prev_queue()] == 0) waits += std::string(to_string(static_cast<DepQueue>(in.pop_prev_queue())));
    if (in.pop_next && tokens[in.pop_next_queue()] == 0) {
      if (!waits.empty()) waits += " and ";
      waits += std::string(to_string(static_cast<DepQueue>(in.pop_next_queue())));
    }
    d.errors.push_back("deadlock: " + std::string(to_string(in.module())) + " instruction " +
                       std::to_string(i) + " (" + in.to_string() + ") waits on " + waits);
  }
  std::sort(d.blocked.begin(), d.blocked.end());
  d.ok = d.errors.empty();
  return d;
}

DramImage pack_conv(const ConvLayer& layer, const AccelConfig& cfg, const Tensor4& input,
                    const Tensor4& weights) {
  const ConvLayer L = pad_channels(layer, cfg);
  const TileDims d = tile_dims(L, cfg);
  const int kk = L.kh * L.kw;
  const int B = cfg.batch, BI = cfg.block_in, BO = cfg.block_out;
  if (input.n != layer.b || input.c != layer.fi || input.h != layer.h || input.w != layer.w) {
    throw CodegenError("input tensor shape does not match the layer");
  }
  if (weights.n != layer.fo || weights.c != layer.fi || weights.h != layer.kh || weights.w != layer.kw) {
    throw CodegenError("weight tensor shape does not match the layer");
  }
  DramImage img;
  img.inp.assign(static_cast<std::size_t>(d.nb) * d.di * L.h * L.w * B * BI, 0);
  for (int nb = 0; nb < d.nb; ++nb)
    for (int ci = 0; ci < d.di; ++ci)
      for (int y = 0; y < L.h; ++y)
        for (int x = 0; x < L.w; ++x) {
          const std::size_t tile = ((static_cast<std::size_t>(nb) * d.di + ci) * L.h + y) * L.w + x;
          for (int bb = 0; bb < B; ++bb)
            for (int i = 0; i < BI; ++i) {
              const int c = ci * BI + i;
              if (c < layer.fi) img.inp[tile * B * BI + bb * BI + i] = input.at(nb * B + bb, c, y, x);
            }
        }
  img.wgt.assign(static_cast<std::size_t>(d.do_) * d.di * kk * BO * BI, 0);
  for (int co = 0; co < d.do_; ++co)
    for (int ci = 0; ci < d.di; ++ci)
      for (int ky = 0; ky < L.kh; ++ky)
        for (int kx = 0; kx < L.kw; ++kx) {
          const std::size_t tile = (static_cast<std::size_t>(co) * d.di + ci) * kk + ky * L.kw + kx;
          for (int o = 0; o < BO; ++o)
            for (int i = 0; i < BI; ++i) {
              const int oc = co * BO + o, ic = ci * BI + i;
              if (oc < layer.fo && ic < layer.fi) {
                img.wgt[tile * BO * BI + o * BI + i] = weights.at(oc, ic, ky, kx);
              }
            }
        }
  const OutputDims od = output_dims(L);
  img.out.assign(static_cast<std::size_t>(d.nb) * d.do_ * od.oh * od.ow * B * BO, 0);
  return img;
}

DramImage pack_alu_layer(const ConvLayer& layer, const AccelConfig& cfg, const Tensor4& input,
                         const Tensor4& weights) {
  const ConvLayer L = pad_channels(layer, cfg);
  const int B = cfg.batch, BO = cfg.block_out;
  if (L.b % B != 0) throw CodegenError("b is not a multiple of batch");
  const int nb_total = L.b / B, channels = L.fo / BO, kk = L.kh * L.kw;
  if (input.n != layer.b || input.c != layer.fi || input.h != layer.h || input.w != layer.w) {
    throw CodegenError("input tensor shape does not match the layer");
  }
  const bool dw = layer.kind == LayerKind::kDepthwise;
  if (dw && (weights.n != layer.fo || weights.c != 1 || weights.h != layer.kh || weights.w != layer.kw)) {
    throw CodegenError("depthwise weights must be (fo, 1, kh, kw)");
  }
  DramImage img;
  const std::size_t tile = static_cast<std::size_t>(B) * BO;
  const std::size_t act_tiles = static_cast<std::size_t>(nb_total) * channels * L.h * L.w;
  img.acc.assign((act_tiles + (dw ? static_cast<std::size_t>(channels) * kk : 0)) * tile, 0);
  for (int nb = 0; nb < nb_total; ++nb)
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < L.h; ++y)
        for (int x = 0; x < L.w; ++x) {
          const std::size_t t = ((static_cast<std::size_t>(nb) * channels + c) * L.h + y) * L.w + x;
          for (int bb = 0; bb < B; ++bb)
            for (int o = 0; o < BO; ++o) {
              const int ch = c * BO + o;
              if (ch < layer.fi) img.acc[t * tile + bb * BO + o] = input.at(nb * B + bb, ch, y, x);
            }
        }
  if (dw) {
    for (int c = 0; c < channels; ++c)
      for (int k = 0; k < kk; ++k) {
        const std::size_t t = act_tiles + static_cast<std::size_t>(c) * kk + k;
        for (int bb = 0; bb < B; ++bb)
          for (int o = 0; o < BO; ++o) {
            const int ch = c * BO + o;
            if (ch < layer.fo) img.acc[t * tile + bb * BO + o] = weights.at(ch, 0, k / L.kw, k % L.kw);
          }
      }
  }
  const OutputDims od = output_dims(L);
  img.out.assign(static_cast<std::size_t>(nb_total) * channels * od.oh * od.ow * tile, 0);
  return img;
}

Tensor4 unpack_output(const ConvLayer& layer, const AccelConfig& cfg, const DramImage& dram) {
  const ConvLayer L = pad_channels(layer, cfg);
  const OutputDims od = output_dims(L);
  const int B = cfg.batch, BO = cfg.block_out;
  const int nb_total = L.b / B, dout = L.fo / BO;
  const std::size_t need = static_cast<std::size_t>(nb_total) * dout * od.oh * od.ow * B * BO;
  if (dram.out.size() < need) throw CodegenError("OUT region is smaller than the layer output");
  Tensor4 t(layer.b, layer.fo, od.oh, od.ow);
  for (int n = 0; n < layer.b; ++n)
    for (int c = 0; c < layer.fo; ++c)
      for (int y = 0; y < od.oh; ++y)
        for (int x = 0; x < od.ow; ++x) {
          const std::size_t tile =
              ((static_cast<std::size_t>(n / B) * dout + c / BO) * od.oh + y) * od.ow + x;
          t.at(n, c, y, x) = dram.out[tile * B * BO + (n % B) * BO + c % BO];
        }
  return t;
}

InstructionStream gen_synthetic_gemm(const AccelConfig& cfg, int n_gemm, int iters) {
  InstructionStream s;
  s.uops.push_back({0, 0, 0});
  Instruction ld_inp = Instruction::load(MemKind::kInp, 0, 0, 1, 1, 1);
  Instruction ld_wgt = Instruction::load(MemKind::kWgt, 0, 0, 1, 1, 1);
  ld_wgt.push_next = true;
  s.insns.push_back(Instruction::load(MemKind::kUop, 0, 0, 1, 1, 1));
  s.insns.push_back(ld_inp);
  s.insns.push_back(ld_wgt);
  for (int i = 0; i < n_gemm; ++i) {
    Instruction g;
    g.opcode = Opcode::kGemm;
    g.reset = i == 0;
    g.uop_begin = 0;
    g.uop_end = 1;
    g.iter_out = static_cast<std::uint32_t>(iters);
    g.iter_in = static_cast<std::uint32_t>(iters);
    g.pop_prev = i == 0;
    g.push_next = i == n_gemm - 1;
    s.insns.push_back(g);
  }
  Instruction st = Instruction::store(0, 0, 1, 1, 1);
  st.pop_prev = true;
  st.push_prev = true;
  s.insns.push_back(st);
  Instruction fin = Instruction::finish();
  fin.pop_next = true;
  s.insns.push_back(fin);
  check_stream_fits(s, cfg);
  return s;
}

InstructionStream gen_synthetic_alu(const AccelConfig& cfg, int n_alu, int iters) {
  InstructionStream s;
  s.uops.push_back({0, 0, 0});
  s.insns.push_back(Instruction::load(MemKind::kUop, 0, 0, 1, 1, 1));
  for (int i = 0; i < n_alu; ++i) {
    Instruction g;
    g.opcode = Opcode::kAlu;
    g.alu_op = AluOp::kAdd;
    g.use_imm = true;
    g.imm = 1;
    g.uop_begin = 0;
    g.uop_end = 1;
    g.iter_out = static_cast<std::uint32_t>(iters);
    g.iter_in = static_cast<std::uint32_t>(iters);
    g.push_next = i == n_alu - 1;
    s.insns.push_back(g);
  }
  Instruction st = Instruction::store(0, 0, 1, 1, 1);
  st.pop_prev = true;
  st.push_prev = true;
  s.insns.push_back(st);
  Instruction fin = Instruction::finish();
  fin.pop_next = true;
  s.insns.push_back(fin);
  check_stream_fits(s, cfg);
  return s;
}

}  // namespace accel
