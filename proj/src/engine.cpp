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

#include "accel/engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace accel {

namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();
constexpr std::int64_t kMaxBurstPulses = 256;

std::uint64_t region_base(MemKind kind) {
  return (static_cast<std::uint64_t>(kind) + 1) << 36;
}

std::int64_t dram_tile_bytes(const AccelConfig& cfg, MemKind kind) {
  return kind == MemKind::kUop ? cfg.uop_bits / 8 : tensor_bytes(cfg, kind);
}

ActivityKind activity_of(const Instruction& in) {
  switch (in.opcode) {
    case Opcode::kGemm: return ActivityKind::kGemm;
    case Opcode::kAlu: return ActivityKind::kAlu;
    case Opcode::kStore: return ActivityKind::kStore;
    case Opcode::kFinish: return ActivityKind::kIdle;
    case Opcode::kLoad:
      switch (in.mem_kind) {
        case MemKind::kInp: return ActivityKind::kLoadInp;
        case MemKind::kWgt: return ActivityKind::kLoadWgt;
        case MemKind::kAcc: return ActivityKind::kLoadAcc;
        default: return ActivityKind::kLoadUop;
      }
  }
  return ActivityKind::kIdle;
}

std::int64_t alu_apply(AluOp op, std::int64_t x, std::int64_t y) {
  switch (op) {
    case AluOp::kAdd: return x + y;
    case AluOp::kMax: return std::max(x, y);
    case AluOp::kMin: return std::min(x, y);
    case AluOp::kShr: {
      if (y >= 0) return x >> std::min<std::int64_t>(y, 63);
      return static_cast<std::int64_t>(static_cast<std::uint64_t>(x)
                                       << std::min<std::int64_t>(-y, 63));
    }
    case AluOp::kMul: return x * wrap_signed(y, 8);
    case AluOp::kClip: return std::min(std::max<std::int64_t>(x, 0), y);
  }
  return x;
}

using AccessList = std::vector<std::pair<MemKind, std::vector<std::uint32_t>>>;

void add_access(AccessList& list, MemKind kind, std::vector<std::uint32_t> idx) {
  if (idx.empty()) return;
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  for (auto& [k, v] : list) {
    if (k == kind) {
      v.insert(v.end(), idx.begin(), idx.end());
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      return;
    }
  }
  list.emplace_back(kind, std::move(idx));
}

/*! \brief Functional and access-trace semantics of one instruction. */
class Datapath {
 public:
  Datapath(const AccelConfig& cfg, const InstructionStream& stream, bool functional,
           DramImage* dram)
      : cfg_(cfg), stream_(stream), functional_(functional), dram_(dram) {
    sp_.uop.assign(static_cast<std::size_t>(cfg.entries(MemKind::kUop)), Uop{});
    if (functional_) {
      sp_.inp.assign(static_cast<std::size_t>(cfg.entries(MemKind::kInp) * elems(MemKind::kInp)), 0);
      sp_.wgt.assign(static_cast<std::size_t>(cfg.entries(MemKind::kWgt) * elems(MemKind::kWgt)), 0);
      sp_.acc.assign(static_cast<std::size_t>(cfg.entries(MemKind::kAcc) * elems(MemKind::kAcc)), 0);
      sp_.out.assign(sp_.acc.size(), 0);
    }
  }

  Scratchpads take() { return std::move(sp_); }

  void execute(std::size_t i, const Instruction& in, AccessRecord* rec) {
    switch (in.opcode) {
      case Opcode::kLoad: load(i, in, rec); break;
      case Opcode::kStore: store(i, in, rec); break;
      case Opcode::kGemm: gemm(i, in, rec); break;
      case Opcode::kAlu: alu(i, in, rec); break;
      case Opcode::kFinish: break;
    }
  }

 private:
  std::int64_t elems(MemKind k) const {
    switch (k) {
      case MemKind::kInp: return std::int64_t{cfg_.batch} * cfg_.block_in;
      case MemKind::kWgt: return std::int64_t{cfg_.block_out} * cfg_.block_in;
      default: return std::int64_t{cfg_.batch} * cfg_.block_out;
    }
  }

  int elem_bits(MemKind k) const {
    switch (k) {
      case MemKind::kInp: return cfg_.inp_elem_bits;
      case MemKind::kWgt: return cfg_.wgt_elem_bits;
      case MemKind::kOut: return cfg_.out_elem_bits;
      default: return cfg_.acc_elem_bits;
    }
  }

  std::vector<std::int32_t>& sram(MemKind k) {
    switch (k) {
      case MemKind::kInp: return sp_.inp;
      case MemKind::kWgt: return sp_.wgt;
      case MemKind::kOut: return sp_.out;
      default: return sp_.acc;
    }
  }

  std::vector<std::int32_t>& dram(MemKind k) {
    switch (k) {
      case MemKind::kInp: return dram_->inp;
      case MemKind::kWgt: return dram_->wgt;
      case MemKind::kOut: return dram_->out;
      default: return dram_->acc;
    }
  }

  void check_entry(std::size_t i, MemKind k, std::uint64_t e) const {
    if (static_cast<std::int64_t>(e) >= cfg_.entries(k)) {
      throw Error("instruction " + std::to_string(i) + ": " + std::string(to_string(k)) +
                  " scratchpad index " + std::to_string(e) + " out of range (" +
                  std::to_string(cfg_.entries(k)) + " entries)");
    }
  }

  void load(std::size_t i, const Instruction& in, AccessRecord* rec) {
    const MemKind k = in.mem_kind;
    const std::uint64_t rows = in.sram_rows(), cols = in.sram_cols();
    std::vector<std::uint32_t> written;
    if (k == MemKind::kUop) {
      for (std::uint64_t y = 0; y < in.y_size; ++y) {
        for (std::uint64_t x = 0; x < in.x_size; ++x) {
          const std::uint64_t src = in.dram_base + y * in.x_stride + x;
          const std::uint64_t dst = in.sram_base + y * in.x_size + x;
          if (src >= stream_.uops.size()) {
            throw Error("instruction " + std::to_string(i) + ": UOP load reads uop " +
                        std::to_string(src) + " beyond the uop image (" +
                        std::to_string(stream_.uops.size()) + " uops)");
          }
          check_entry(i, k, dst);
          sp_.uop[dst] = stream_.uops[src];
          if (rec) written.push_back(static_cast<std::uint32_t>(dst));
        }
      }
      if (rec) add_access(rec->writes, k, std::move(written));
      return;
    }
    const std::int64_t n = elems(k);
    const int bits = elem_bits(k);
    const std::int64_t pad = in.pad_kind == PadKind::kMinValue ? signed_min(bits) : 0;
    for (std::uint64_t y = 0; y < rows; ++y) {
      for (std::uint64_t x = 0; x < cols; ++x) {
        const std::uint64_t dst = in.sram_base + y * cols + x;
        check_entry(i, k, dst);
        if (rec) written.push_back(static_cast<std::uint32_t>(dst));
        if (!functional_) continue;
        auto& s = sram(k);
        const bool data = y >= in.y_pad_0 && y < in.y_pad_0 + in.y_size && x >= in.x_pad_0 &&
                          x < in.x_pad_0 + in.x_size;
        if (!data) {
          std::fill_n(s.begin() + static_cast<std::ptrdiff_t>(dst * n), n,
                      static_cast<std::int32_t>(pad));
          continue;
        }
        const std::uint64_t tile = in.dram_base + (y - in.y_pad_0) * in.x_stride + (x - in.x_pad_0);
        const auto& d = dram(k);
        if ((tile + 1) * static_cast<std::uint64_t>(n) > d.size()) {
          throw Error("instruction " + std::to_string(i) + ": " + std::string(to_string(k)) +
                      " load reads DRAM tile " + std::to_string(tile) + " beyond the image (" +
                      std::to_string(d.size() / n) + " tiles)");
        }
        for (std::int64_t e = 0; e < n; ++e) {
          s[dst * n + e] = static_cast<std::int32_t>(wrap_signed(d[tile * n + e], bits));
        }
      }
    }
    if (rec) add_access(rec->writes, k, std::move(written));
  }

  void store(std::size_t i, const Instruction& in, AccessRecord* rec) {
    const std::int64_t n = elems(MemKind::kOut);
    std::vector<std::uint32_t> read;
    for (std::uint64_t y = 0; y < in.y_size; ++y) {
      for (std::uint64_t x = 0; x < in.x_size; ++x) {
        const std::uint64_t src = in.sram_base + y * in.x_size + x;
        check_entry(i, MemKind::kOut, src);
        if (rec) read.push_back(static_cast<std::uint32_t>(src));
        if (!functional_) continue;
        const std::uint64_t tile = in.dram_base + y * in.x_stride + x;
        auto& d = dram_->out;
        if ((tile + 1) * static_cast<std::uint64_t>(n) > d.size()) {
          throw Error("instruction " + std::to_string(i) + ": STORE writes DRAM tile " +
                      std::to_string(tile) + " beyond the OUT image (" +
                      std::to_string(d.size() / n) + " tiles)");
        }
        std::copy_n(sp_.out.begin() + static_cast<std::ptrdiff_t>(src * n), n,
                    d.begin() + static_cast<std::ptrdiff_t>(tile * n));
      }
    }
    if (rec) add_access(rec->reads, MemKind::kOut, std::move(read));
  }

  template <typename F>
  void for_each_iter(std::size_t i, const Instruction& in, AccessRecord* rec, F body) {
    std::vector<std::uint32_t> uops;
    for (std::uint32_t u = in.uop_begin; u < in.uop_end; ++u) {
      check_entry(i, MemKind::kUop, u);
      if (rec) uops.push_back(u);
    }
    if (rec) add_access(rec->reads, MemKind::kUop, std::move(uops));
    for (std::uint64_t a = 0; a < in.iter_out; ++a)
      for (std::uint64_t b = 0; b < in.iter_in; ++b)
        for (std::uint32_t u = in.uop_begin; u < in.uop_end; ++u) body(sp_.uop[u], a, b);
  }

  void write_acc(std::uint64_t dst, std::int64_t e, std::int64_t v) {
    const std::int64_t wrapped = wrap_signed(v, cfg_.acc_elem_bits);
    sp_.acc[dst * elems(MemKind::kAcc) + e] = static_cast<std::int32_t>(wrapped);
    sp_.out[dst * elems(MemKind::kAcc) + e] =
        static_cast<std::int32_t>(wrap_signed(wrapped, cfg_.out_elem_bits));
  }

  void gemm(std::size_t i, const Instruction& in, AccessRecord* rec) {
    const int B = cfg_.batch, BI = cfg_.block_in, BO = cfg_.block_out;
    std::vector<std::uint32_t> ri, rw, ra, wa;
    for_each_iter(i, in, rec, [&](const Uop& u, std::uint64_t a, std::uint64_t b) {
      const std::uint64_t dst = u.acc_idx + a * in.dst_factor_out + b * in.dst_factor_in;
      check_entry(i, MemKind::kAcc, dst);
      if (rec) wa.push_back(static_cast<std::uint32_t>(dst));
      if (in.reset) {
        if (functional_) {
          for (int e = 0; e < B * BO; ++e) write_acc(dst, e, 0);
        }
        return;
      }
      const std::uint64_t src = u.inp_idx + a * in.src_factor_out + b * in.src_factor_in;
      const std::uint64_t wgt = u.wgt_idx + a * in.wgt_factor_out + b * in.wgt_factor_in;
      check_entry(i, MemKind::kInp, src);
      check_entry(i, MemKind::kWgt, wgt);
      if (rec) {
        ri.push_back(static_cast<std::uint32_t>(src));
        rw.push_back(static_cast<std::uint32_t>(wgt));
        ra.push_back(static_cast<std::uint32_t>(dst));
      }
      if (!functional_) return;
      for (int bb = 0; bb < B; ++bb) {
        for (int o = 0; o < BO; ++o) {
          std::int64_t sum = sp_.acc[dst * B * BO + bb * BO + o];
          const std::int32_t* x = &sp_.inp[src * B * BI + bb * BI];
          const std::int32_t* w = &sp_.wgt[wgt * BO * BI + o * BI];
          for (int k = 0; k < BI; ++k) sum += std::int64_t{x[k]} * w[k];
          write_acc(dst, bb * BO + o, sum);
        }
      }
    });
    if (rec) {
      add_access(rec->reads, MemKind::kInp, std::move(ri));
      add_access(rec->reads, MemKind::kWgt, std::move(rw));
      add_access(rec->reads, MemKind::kAcc, std::move(ra));
      add_access(rec->writes, MemKind::kOut, wa);
      add_access(rec->writes, MemKind::kAcc, std::move(wa));
    }
  }

  void alu(std::size_t i, const Instruction& in, AccessRecord* rec) {
    const std::int64_t n = elems(MemKind::kAcc);
    std::vector<std::uint32_t> ra, wa;
    for_each_iter(i, in, rec, [&](const Uop& u, std::uint64_t a, std::uint64_t b) {
      const std::uint64_t dst = u.acc_idx + a * in.dst_factor_out + b * in.dst_factor_in;
      check_entry(i, MemKind::kAcc, dst);
      if (rec) wa.push_back(static_cast<std::uint32_t>(dst));
      if (in.reset) {
        if (functional_) {
          for (std::int64_t e = 0; e < n; ++e) write_acc(dst, e, 0);
        }
        return;
      }
      const std::uint64_t src = u.inp_idx + a * in.src_factor_out + b * in.src_factor_in;
      if (!in.use_imm) check_entry(i, MemKind::kAcc, src);
      if (rec) {
        ra.push_back(static_cast<std::uint32_t>(dst));
        if (!in.use_imm) ra.push_back(static_cast<std::uint32_t>(src));
      }
      if (!functional_) return;
      for (std::int64_t e = 0; e < n; ++e) {
        const std::int64_t x = sp_.acc[dst * n + e];
        const std::int64_t y = in.use_imm ? in.imm : sp_.acc[src * n + e];
        write_acc(dst, e, alu_apply(in.alu_op, x, y));
      }
    });
    if (rec) {
      add_access(rec->reads, MemKind::kAcc, std::move(ra));
      add_access(rec->writes, MemKind::kOut, wa);
      add_access(rec->writes, MemKind::kAcc, std::move(wa));
    }
  }

  const AccelConfig& cfg_;
  const InstructionStream& stream_;
  bool functional_;
  DramImage* dram_;
  Scratchpads sp_;
};

enum class Phase : std::uint8_t { kIdle, kIssuing, kBusy, kPushing };

struct ModuleState {
  std::deque<std::size_t> cmdq;
  Phase phase = Phase::kIdle;
  std::size_t cur = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;
  bool end_known = false;
  std::int64_t next_issue = 0;
  std::vector<VmeRequest> reqs;
  std::size_t next_req = 0;
  int outstanding = 0;
  std::int64_t data_done = 0;
  std::int64_t data_pulses = 0;
  bool pushed_prev = false;
  bool pushed_next = false;
  std::int64_t cursor = 0;
};

}  // namespace

std::string_view to_string(ActivityKind kind) {
  switch (kind) {
    case ActivityKind::kGemm: return "GEMM";
    case ActivityKind::kAlu: return "ALU";
    case ActivityKind::kLoadInp: return "LOAD_INP";
    case ActivityKind::kLoadWgt: return "LOAD_WGT";
    case ActivityKind::kLoadAcc: return "LOAD_ACC";
    case ActivityKind::kLoadUop: return "LOAD_UOP";
    case ActivityKind::kStore: return "STORE";
    case ActivityKind::kIdle: return "IDLE";
    case ActivityKind::kBlocked: return "BLOCKED";
  }
  return "?";
}

PulsePlan plan_pulses(std::uint64_t addr, std::uint64_t bytes, int bus_bits) {
  PulsePlan p;
  if (bytes == 0) return p;
  const std::uint64_t bb = static_cast<std::uint64_t>(bus_bits) / 8;
  const std::uint64_t off = addr % bb;
  p.pulses = static_cast<std::int64_t>((off + bytes + bb - 1) / bb);
  auto mask = [](std::uint64_t lo, std::uint64_t hi) {
    std::uint64_t m = 0;
    for (std::uint64_t b = lo; b < hi; ++b) m |= std::uint64_t{1} << b;
    return m;
  };
  p.first_mask = mask(off, std::min(bb, off + bytes));
  p.last_mask = p.pulses == 1 ? p.first_mask : mask(0, (off + bytes - 1) % bb + 1);
  return p;
}

Vme::Vme(const AccelConfig& cfg, std::uint64_t seed)
    : bus_bytes_(cfg.axi_data_bits / 8),
      latency_(cfg.dram_latency_cycles),
      uop_bytes_(cfg.uop_bits / 8),
      capacity_(cfg.vme_max_inflight),
      seed_(seed),
      rng_(seed) {
  for (int t = capacity_ - 1; t >= 0; --t) free_tags_.push_back(t);
}

int Vme::issue(const VmeRequest& req, std::int64_t now) {
  if (free_tags_.empty()) throw Error("VME issue with no free tag");
  const int tag = free_tags_.back();
  free_tags_.pop_back();
  Entry e;
  e.req = req;
  e.seq = next_seq_++;
  e.ready = req.write ? now : now + latency_;
  e.pulses = plan_pulses(req.addr, req.bytes, bus_bytes_ * 8).pulses;
  table_.emplace(tag, e);
  ++requests_;
  max_inflight_ = std::max(max_inflight_, inflight());
  if (req.kind == MemKind::kUop && uop_bytes_ <= bus_bytes_) {
    const auto per_pulse = static_cast<std::uint64_t>(bus_bytes_ / uop_bytes_);
    const std::uint64_t carried = std::min<std::uint64_t>(per_pulse, req.bytes / uop_bytes_);
    max_uops_per_pulse_ = std::max(max_uops_per_pulse_, static_cast<int>(carried));
  }
  return tag;
}

bool Vme::schedule(std::int64_t now) {
  if (bus_free_ > now) return false;
  std::vector<int> ready;
  for (const auto& [tag, e] : table_) {
    if (e.done < 0 && e.ready <= now) ready.push_back(tag);
  }
  if (ready.empty()) return false;
  std::sort(ready.begin(), ready.end(),
            [&](int a, int b) { return table_.at(a).seq < table_.at(b).seq; });
  std::size_t pick = 0;
  if (seed_ != 0) {
    const std::size_t window = std::min<std::size_t>(ready.size(), static_cast<std::size_t>(capacity_));
    pick = std::uniform_int_distribution<std::size_t>(0, window - 1)(rng_);
  }
  Entry& e = table_.at(ready[pick]);
  bus_free_ = now + e.pulses;
  e.done = e.req.write ? now + e.pulses + latency_ : now + e.pulses;
  (e.req.write ? write_pulses_ : read_pulses_) += e.pulses;
  return true;
}

std::vector<Vme::Completion> Vme::complete(std::int64_t now) {
  std::vector<std::pair<std::pair<std::int64_t, std::uint64_t>, int>> due;
  for (const auto& [tag, e] : table_) {
    if (e.done >= 0 && e.done <= now) due.push_back({{e.done, e.seq}, tag});
  }
  std::sort(due.begin(), due.end());
  std::vector<Completion> out;
  for (const auto& [key, tag] : due) {
    out.push_back({tag, table_.at(tag).req, key.first});
    table_.erase(tag);
    free_tags_.push_back(tag);
  }
  return out;
}

std::int64_t Vme::next_event(std::int64_t now) const {
  std::int64_t t = kNever;
  for (const auto& [tag, e] : table_) {
    if (e.done >= 0) {
      if (e.done > now) t = std::min(t, e.done);
    } else {
      t = std::min(t, std::max({e.ready, bus_free_, now + 1}));
    }
  }
  return t;
}

const VmeRequest& Vme::lookup(int tag) const {
  auto it = table_.find(tag);
  if (it == table_.end()) throw Error("VME completion for unknown tag " + std::to_string(tag));
  return it->second.req;
}

std::int64_t compute_latency(const Instruction& in, const AccelConfig& cfg) {
  const std::int64_t work = std::int64_t{in.iter_out} * in.iter_in *
                            (in.uop_end > in.uop_begin ? in.uop_end - in.uop_begin : 0);
  switch (in.opcode) {
    case Opcode::kGemm:
      return std::max<std::int64_t>(1, cfg.gemm_pipeline_depth + cfg.gemm_ii * work);
    case Opcode::kAlu: {
      const bool two = !in.use_imm;
      const std::int64_t ii = two ? cfg.alu_ii_two : cfg.alu_ii_imm;
      return std::max<std::int64_t>(1, cfg.gemm_pipeline_depth + (two ? 1 : 0) + ii * work);
    }
    case Opcode::kFinish: return 1;
    default: throw Error("compute_latency of a memory instruction");
  }
}

SimReport run(const InstructionStream& stream, const AccelConfig& cfg, const SimOptions& options,
              DramImage dram) {
  cfg.validate();
  if (options.ins_base % 8 != 0) {
    throw Error("instruction base address " + std::to_string(options.ins_base) +
                " is not 64-bit aligned");
  }
  if (options.token_queue_depth < 1 || options.command_queue_depth < 1) {
    throw Error("queue depths must be positive");
  }
  const bool functional = options.mode == SimMode::kFunctional;
  const auto& insns = stream.insns;
  const std::size_t n = insns.size();
  const int bus_bytes = cfg.axi_data_bits / 8;
  const std::int64_t max_chunk = kMaxBurstPulses * bus_bytes;

  SimReport rep;
  rep.timing.assign(n, InsnTiming{});
  rep.fetch_addresses.reserve(n);
  Vme vme(cfg, options.seed);
  Datapath dp(cfg, stream, functional, &dram);
  std::array<ModuleState, 3> mods;
  std::array<int, kNumDepQueues> tokens{};
  std::size_t fetched = 0;
  std::int64_t next_dispatch = cfg.dram_latency_cycles;
  std::int64_t now = 0;

  auto emit = [&](Module m, std::int64_t s, std::int64_t e, ActivityKind k, std::int64_t insn) {
    if (e > s) rep.intervals.push_back({s, e, m, k, insn});
  };

  auto prepare_mem = [&](ModuleState& st, const Instruction& in) {
    st.reqs.clear();
    st.next_req = 0;
    st.data_pulses = 0;
    st.data_done = st.start;
    const std::int64_t tile = dram_tile_bytes(cfg, in.mem_kind);
    const bool write = in.opcode == Opcode::kStore;
    for (std::uint64_t y = 0; y < in.y_size && in.x_size > 0; ++y) {
      std::uint64_t addr = region_base(in.mem_kind) +
                           (in.dram_base + y * in.x_stride) * static_cast<std::uint64_t>(tile);
      std::uint64_t left = static_cast<std::uint64_t>(in.x_size) * tile;
      std::uint32_t sram = in.sram_base + static_cast<std::uint32_t>(y * in.sram_cols());
      while (left > 0) {
        const std::uint64_t room = max_chunk - addr % bus_bytes;
        const std::uint64_t bytes = std::min(left, room);
        st.reqs.push_back({in.mem_kind, write, addr, bytes, sram, 0});
        st.data_pulses += plan_pulses(addr, bytes, cfg.axi_data_bits).pulses;
        addr += bytes;
        left -= bytes;
      }
    }
  };

  auto can_pop = [&](const Instruction& in) {
    const int pp = in.pop_prev ? in.pop_prev_queue() : -1;
    const int pn = in.pop_next ? in.pop_next_queue() : -1;
    return (pp < 0 || tokens[pp] > 0) && (pn < 0 || tokens[pn] > 0);
  };

  auto step = [&](int mi) -> bool {
    ModuleState& st = mods[mi];
    const Module m = static_cast<Module>(mi);
    switch (st.phase) {
      case Phase::kIdle: {
        if (st.cmdq.empty()) return false;
        const std::size_t i = st.cmdq.front();
        const Instruction& in = insns[i];
        if (!can_pop(in)) return false;
        if (in.pop_prev && in.pop_prev_queue() >= 0) --tokens[in.pop_prev_queue()];
        if (in.pop_next && in.pop_next_queue() >= 0) --tokens[in.pop_next_queue()];
        st.cmdq.pop_front();
        st.cur = i;
        st.start = now;
        st.pushed_prev = st.pushed_next = false;
        const std::int64_t dispatch = rep.timing[i].dispatch;
        const std::int64_t ready = std::clamp(dispatch, st.cursor, now);
        emit(m, st.cursor, ready, ActivityKind::kIdle, -1);
        emit(m, ready, now, ActivityKind::kBlocked, static_cast<std::int64_t>(i));
        rep.timing[i].start = now;
        if (!in.is_mem()) {
          st.end = now + compute_latency(in, cfg);
          st.end_known = true;
          st.phase = Phase::kBusy;
        } else {
          prepare_mem(st, in);
          if (st.reqs.empty()) {
            st.end = now + std::max<std::int64_t>(1, static_cast<std::int64_t>(in.pad_entries()));
            st.end_known = true;
            st.phase = Phase::kBusy;
          } else {
            st.next_issue = now;
            st.phase = Phase::kIssuing;
          }
        }
        return true;
      }
      case Phase::kIssuing: {
        if (st.next_issue > now || !vme.has_free_tag()) return false;
        VmeRequest r = st.reqs[st.next_req++];
        r.owner = mi;
        vme.issue(r, now);
        ++st.outstanding;
        st.next_issue = now + 1;
        if (st.next_req == st.reqs.size()) {
          st.phase = Phase::kBusy;
          st.end_known = false;
        }
        return true;
      }
      case Phase::kBusy: {
        const Instruction& in = insns[st.cur];
        if (!st.end_known) {
          if (st.outstanding > 0) return false;
          st.end = std::max({st.data_done,
                             st.start + st.data_pulses + static_cast<std::int64_t>(in.pad_entries()),
                             st.start + 1});
          st.end_known = true;
          return true;
        }
        if (st.end > now) return false;
        AccessRecord* rec = nullptr;
        if (options.trace_accesses && in.opcode != Opcode::kFinish) {
          rep.accesses.push_back({st.cur, m, st.start, st.end, {}, {}});
          rec = &rep.accesses.back();
        }
        dp.execute(st.cur, in, rec);
        const ActivityKind k = activity_of(in);
        emit(m, st.start, st.end, k, in.opcode == Opcode::kFinish ? -1 : static_cast<std::int64_t>(st.cur));
        if (k == ActivityKind::kGemm) rep.gemm_cycles += st.end - st.start;
        if (k == ActivityKind::kAlu) rep.alu_cycles += st.end - st.start;
        st.phase = Phase::kPushing;
        return true;
      }
      case Phase::kPushing: {
        const Instruction& in = insns[st.cur];
        bool moved = false;
        auto push = [&](bool want, int q, bool& done) {
          if (!want || q < 0 || done) {
            done = true;
            return;
          }
          if (tokens[q] >= options.token_queue_depth) return;
          ++tokens[q];
          rep.token_high_water[q] = std::max(rep.token_high_water[q], tokens[q]);
          done = true;
          moved = true;
        };
        push(in.push_prev, in.push_prev_queue(), st.pushed_prev);
        push(in.push_next, in.push_next_queue(), st.pushed_next);
        if (!(st.pushed_prev && st.pushed_next)) return moved;
        emit(m, st.end, now, ActivityKind::kBlocked, static_cast<std::int64_t>(st.cur));
        rep.timing[st.cur].end = now;
        st.cursor = now;
        st.phase = Phase::kIdle;
        return true;
      }
    }
    return false;
  };

  auto all_done = [&]() {
    if (fetched < n || vme.inflight() > 0) return false;
    for (const auto& st : mods) {
      if (st.phase != Phase::kIdle || !st.cmdq.empty()) return false;
    }
    return true;
  };

  auto diagnose = [&]() {
    std::vector<std::string> parts;
    for (int mi = 0; mi < 3; ++mi) {
      const ModuleState& st = mods[mi];
      const std::string mod(to_string(static_cast<Module>(mi)));
      if (st.phase == Phase::kIdle && !st.cmdq.empty()) {
        const std::size_t i = st.cmdq.front();
        const Instruction& in = insns[i];
        std::string waits;
        auto add = [&](int q) {
          if (!waits.empty()) waits += " and ";
          waits += to_string(static_cast<DepQueue>(q));
        };
        if (in.pop_prev && in.pop_prev_queue() >= 0 && tokens[in.pop_prev_queue()] == 0) add(in.pop_prev_queue());
        if (in.pop_next && in.pop_next_queue() >= 0 && tokens[in.pop_next_queue()] == 0) add(in.pop_next_queue());
        if (waits.empty()) continue;
        rep.blocked.push_back(i);
        parts.push_back(mod + " instruction " + std::to_string(i) + " (" + in.to_string() +
                        ") waits on " + waits);
      } else if (st.phase == Phase::kPushing) {
        const Instruction& in = insns[st.cur];
        const int q = !st.pushed_prev ? in.push_prev_queue() : in.push_next_queue();
        rep.blocked.push_back(st.cur);
        parts.push_back(mod + " instruction " + std::to_string(st.cur) + " (" + in.to_string() +
                        ") waits for space on " + std::string(to_string(static_cast<DepQueue>(q))));
      } else if (st.phase != Phase::kIdle) {
        parts.push_back(mod + " instruction " + std::to_string(st.cur) + " in flight");
      }
    }
    std::sort(rep.blocked.begin(), rep.blocked.end());
    std::string msg;
    for (const auto& p : parts) msg += (msg.empty() ? "" : "; ") + p;
    return msg;
  };

  while (true) {
    bool progress = true;
    while (progress) {
      progress = false;
      for (const auto& c : vme.complete(now)) {
        ModuleState& st = mods[c.req.owner];
        --st.outstanding;
        st.data_done = std::max(st.data_done, c.time);
        rep.dram_bytes.by_kind[static_cast<int>(c.req.kind)] += static_cast<std::int64_t>(c.req.bytes);
        progress = true;
      }
      if (vme.schedule(now)) progress = true;
      if (fetched < n && next_dispatch <= now) {
        ModuleState& st = mods[static_cast<int>(insns[fetched].module())];
        if (static_cast<int>(st.cmdq.size()) < options.command_queue_depth) {
          st.cmdq.push_back(fetched);
          rep.timing[fetched].dispatch = now;
          rep.fetch_addresses.push_back(options.ins_base + 16 * fetched);
          ++fetched;
          next_dispatch = now + 1;
          progress = true;
        }
      }
      for (int mi = 0; mi < 3; ++mi) {
        if (step(mi)) progress = true;
      }
    }
    if (all_done()) {
      rep.completed = true;
      break;
    }
    std::int64_t next = vme.next_event(now);
    if (fetched < n && next_dispatch > now) {
      const ModuleState& st = mods[static_cast<int>(insns[fetched].module())];
      if (static_cast<int>(st.cmdq.size()) < options.command_queue_depth) {
        next = std::min(next, next_dispatch);
      }
    }
    for (const auto& st : mods) {
      if (st.phase == Phase::kIssuing && st.next_issue > now && vme.has_free_tag()) {
        next = std::min(next, st.next_issue);
      }
      if (st.phase == Phase::kBusy && st.end_known && st.end > now) next = std::min(next, st.end);
    }
    if (next == kNever) {
      rep.deadlock = "deadlock: " + diagnose();
      break;
    }
    if (options.max_cycles > 0 && next > options.max_cycles) {
      rep.deadlock = "exceeded max_cycles=" + std::to_string(options.max_cycles) + ": " + diagnose();
      break;
    }
    now = next;
  }

  rep.total_cycles = now;
  for (int mi = 0; mi < 3; ++mi) {
    emit(static_cast<Module>(mi), mods[mi].cursor, now, ActivityKind::kIdle, -1);
  }
  std::stable_sort(rep.intervals.begin(), rep.intervals.end(), [](const Interval& a, const Interval& b) {
    if (a.process != b.process) return a.process < b.process;
    return a.start < b.start;
  });
  rep.vme_max_inflight = vme.max_inflight();
  rep.vme_max_uops_per_pulse = vme.max_uops_per_pulse();
  rep.vme_requests = vme.requests();
  rep.vme_read_pulses = vme.read_pulses();
  rep.vme_write_pulses = vme.write_pulses();
  std::sort(rep.accesses.begin(), rep.accesses.end(),
            [](const AccessRecord& a, const AccessRecord& b) { return a.insn < b.insn; });
  if (functional) {
    rep.scratch = dp.take();
    rep.dram = std::move(dram);
  }
  return rep;
}

std::vector<Hazard> hazard_log(const SimReport& report) {
  struct EntryState {
    const AccessRecord* writer = nullptr;
    std::vector<const AccessRecord*> readers;
  };
  std::unordered_map<std::uint64_t, EntryState> state;
  std::vector<Hazard> out;
  std::set<std::tuple<std::size_t, std::size_t, int, std::string>> seen;
  auto key = [](MemKind k, std::uint32_t e) { return (static_cast<std::uint64_t>(k) << 32) | e; };
  auto flag = [&](const char* what, const AccessRecord& first, const AccessRecord& second,
                  MemKind k, std::uint32_t e) {
    if (!seen.insert({first.insn, second.insn, static_cast<int>(k), what}).second) return;
    std::ostringstream os;
    os << what << ": instruction " << second.insn << " started at " << second.start
       << " before instruction " << first.insn << " finished at " << first.end;
    out.push_back({std::string(to_string(k)) + "[" + std::to_string(e) + "]", os.str(), first.insn,
                   second.insn});
  };
  for (const AccessRecord& r : report.accesses) {
    for (const auto& [k, entries] : r.reads) {
      for (std::uint32_t e : entries) {
        EntryState& s = state[key(k, e)];
        if (s.writer && s.writer != &r && r.start < s.writer->end) flag("RAW", *s.writer, r, k, e);
      }
    }
    for (const auto& [k, entries] : r.writes) {
      for (std::uint32_t e : entries) {
        EntryState& s = state[key(k, e)];
        if (s.writer && s.writer != &r && r.start < s.writer->end) flag("WAW", *s.writer, r, k, e);
        for (const AccessRecord* rd : s.readers) {
          if (rd != &r && r.start < rd->end) flag("WAR", *rd, r, k, e);
        }
      }
    }
    for (const auto& [k, entries] : r.reads) {
      for (std::uint32_t e : entries) state[key(k, e)].readers.push_back(&r);
    }
    for (const auto& [k, entries] : r.writes) {
      for (std::uint32_t e : entries) {
        EntryState& s = state[key(k, e)];
        s.writer = &r;
        s.readers.clear();
      }
    }
  }
  return out;
}

std::string report_json(const SimReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["completed"] = r.completed;
  j["total_cycles"] = r.total_cycles;
  ordered_json bytes;
  for (MemKind k : {MemKind::kInp, MemKind::kWgt, MemKind::kAcc, MemKind::kUop, MemKind::kOut}) {
    bytes[std::string(to_string(k))] = r.dram_bytes[k];
  }
  bytes["read"] = r.dram_bytes.read();
  bytes["written"] = r.dram_bytes.written();
  j["dram_bytes"] = bytes;
  ordered_json hw;
  for (int q = 0; q < kNumDepQueues; ++q) {
    hw[std::string(to_string(static_cast<DepQueue>(q)))] = r.token_high_water[q];
  }
  j["token_high_water"] = hw;
  j["deadlock"] = r.deadlock ? ordered_json(*r.deadlock) : ordered_json(nullptr);
  j["blocked"] = r.blocked;
  j["gemm_cycles"] = r.gemm_cycles;
  j["alu_cycles"] = r.alu_cycles;
  j["vme"] = {{"requests", r.vme_requests},
              {"max_inflight", r.vme_max_inflight},
              {"read_pulses", r.vme_read_pulses},
              {"write_pulses", r.vme_write_pulses},
              {"max_uops_per_pulse", r.vme_max_uops_per_pulse}};
  ordered_json iv = ordered_json::array();
  for (const Interval& i : r.intervals) {
    iv.push_back({{"start", i.start},
                  {"end", i.end},
                  {"process", to_string(i.process)},
                  {"kind", to_string(i.kind)},
                  {"insn", i.insn}});
  }
  j["intervals"] = iv;
  return j.dump(2) + "\n";
}

std::string intervals_csv(const SimReport& r) {
  std::ostringstream os;
  os << "cycle_start,cycle_end,process,kind\n";
  for (const Interval& i : r.intervals) {
    os << i.start << ',' << i.end << ',' << to_string(i.process) << ',' << to_string(i.kind) << '\n';
  }
  return os.str();
}

}  // namespace accel
