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

#include "accel/isa.hpp"

#include <cstring>
#include <sstream>

#include "json.hpp"

namespace accel {

namespace {

using Words = std::array<std::uint64_t, 2>;

void put_bits(Words& w, int offset, int bits, std::uint64_t value) {
  for (int i = 0; i < bits; ++i) {
    const int pos = offset + i;
    if ((value >> i) & 1U) w[pos / 64] |= std::uint64_t{1} << (pos % 64);
  }
}

std::uint64_t get_bits(const Words& w, int offset, int bits) {
  std::uint64_t v = 0;
  for (int i = 0; i < bits; ++i) {
    const int pos = offset + i;
    if ((w[pos / 64] >> (pos % 64)) & 1U) v |= std::uint64_t{1} << i;
  }
  return v;
}

std::uint64_t field_value(const Instruction& in, std::string_view name, int bits) {
  if (name == "opcode") return static_cast<std::uint64_t>(in.opcode);
  if (name == "pop_prev") return in.pop_prev;
  if (name == "pop_next") return in.pop_next;
  if (name == "push_prev") return in.push_prev;
  if (name == "push_next") return in.push_next;
  if (name == "mem_kind") return static_cast<std::uint64_t>(in.mem_kind);
  if (name == "sram_base") return in.sram_base;
  if (name == "dram_base") return in.dram_base;
  if (name == "y_size") return in.y_size;
  if (name == "x_size") return in.x_size;
  if (name == "x_stride") return in.x_stride;
  if (name == "y_pad_0") return in.y_pad_0;
  if (name == "y_pad_1") return in.y_pad_1;
  if (name == "x_pad_0") return in.x_pad_0;
  if (name == "x_pad_1") return in.x_pad_1;
  if (name == "pad_kind") return static_cast<std::uint64_t>(in.pad_kind);
  if (name == "reset") return in.reset;
  if (name == "uop_begin") return in.uop_begin;
  if (name == "uop_end") return in.uop_end;
  if (name == "iter_out") return in.iter_out;
  if (name == "iter_in") return in.iter_in;
  if (name == "acc_factor_out" || name == "dst_factor_out") return in.dst_factor_out;
  if (name == "acc_factor_in" || name == "dst_factor_in") return in.dst_factor_in;
  if (name == "inp_factor_out" || name == "src_factor_out") return in.src_factor_out;
  if (name == "inp_factor_in" || name == "src_factor_in") return in.src_factor_in;
  if (name == "wgt_factor_out") return in.wgt_factor_out;
  if (name == "wgt_factor_in") return in.wgt_factor_in;
  if (name == "alu_op") return static_cast<std::uint64_t>(in.alu_op);
  if (name == "use_imm") return in.use_imm;
  if (name == "imm") {
    if (in.imm < signed_min(bits) || in.imm > signed_max(bits)) {
      throw CodegenError("index overflow: imm=" + std::to_string(in.imm) + " does not fit " +
                         std::to_string(bits) + " signed bits");
    }
    return static_cast<std::uint64_t>(in.imm) & ((std::uint64_t{1} << bits) - 1);
  }
  throw CodegenError("unknown instruction field '" + std::string(name) + "'");
}

void set_field(Instruction& in, std::string_view name, std::uint64_t v, int bits) {
  auto u32 = [&] { return static_cast<std::uint32_t>(v); };
  if (name == "opcode") in.opcode = static_cast<Opcode>(v);
  else if (name == "pop_prev") in.pop_prev = v != 0;
  else if (name == "pop_next") in.pop_next = v != 0;
  else if (name == "push_prev") in.push_prev = v != 0;
  else if (name == "push_next") in.push_next = v != 0;
  else if (name == "mem_kind") in.mem_kind = static_cast<MemKind>(v);
  else if (name == "sram_base") in.sram_base = u32();
  else if (name == "dram_base") in.dram_base = v;
  else if (name == "y_size") in.y_size = u32();
  else if (name == "x_size") in.x_size = u32();
  else if (name == "x_stride") in.x_stride = u32();
  else if (name == "y_pad_0") in.y_pad_0 = u32();
  else if (name == "y_pad_1") in.y_pad_1 = u32();
  else if (name == "x_pad_0") in.x_pad_0 = u32();
  else if (name == "x_pad_1") in.x_pad_1 = u32();
  else if (name == "pad_kind") in.pad_kind = static_cast<PadKind>(v);
  else if (name == "reset") in.reset = v != 0;
  else if (name == "uop_begin") in.uop_begin = u32();
  else if (name == "uop_end") in.uop_end = u32();
  else if (name == "iter_out") in.iter_out = u32();
  else if (name == "iter_in") in.iter_in = u32();
  else if (name == "acc_factor_out" || name == "dst_factor_out") in.dst_factor_out = u32();
  else if (name == "acc_factor_in" || name == "dst_factor_in") in.dst_factor_in = u32();
  else if (name == "inp_factor_out" || name == "src_factor_out") in.src_factor_out = u32();
  else if (name == "inp_factor_in" || name == "src_factor_in") in.src_factor_in = u32();
  else if (name == "wgt_factor_out") in.wgt_factor_out = u32();
  else if (name == "wgt_factor_in") in.wgt_factor_in = u32();
  else if (name == "alu_op") in.alu_op = static_cast<AluOp>(v);
  else if (name == "use_imm") in.use_imm = v != 0;
  else if (name == "imm") in.imm = static_cast<std::int32_t>(wrap_signed(static_cast<std::int64_t>(v), bits));
  else throw CodegenError("unknown instruction field '" + std::string(name) + "'");
}

constexpr char kMagic[4] = {'A', 'C', 'C', 'S'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view in, std::size_t& pos, int bytes) {
  if (pos + bytes > in.size()) throw CodegenError("truncated binary stream");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += bytes;
  return v;
}

nlohmann::ordered_json to_json(const Instruction& in) {
  nlohmann::ordered_json j;
  j["opcode"] = std::string(to_string(in.opcode));
  j["pop_prev"] = in.pop_prev;
  j["pop_next"] = in.pop_next;
  j["push_prev"] = in.push_prev;
  j["push_next"] = in.push_next;
  switch (in.opcode) {
    case Opcode::kLoad:
    case Opcode::kStore:
      j["mem_kind"] = std::string(to_string(in.mem_kind));
      j["sram_base"] = in.sram_base;
      j["dram_base"] = in.dram_base;
      j["y_size"] = in.y_size;
      j["x_size"] = in.x_size;
      j["x_stride"] = in.x_stride;
      j["y_pad_0"] = in.y_pad_0;
      j["y_pad_1"] = in.y_pad_1;
      j["x_pad_0"] = in.x_pad_0;
      j["x_pad_1"] = in.x_pad_1;
      j["pad_kind"] = std::string(to_string(in.pad_kind));
      break;
    case Opcode::kGemm:
    case Opcode::kAlu:
      j["reset"] = in.reset;
      j["uop_begin"] = in.uop_begin;
      j["uop_end"] = in.uop_end;
      j["iter_out"] = in.iter_out;
      j["iter_in"] = in.iter_in;
      j["dst_factor_out"] = in.dst_factor_out;
      j["dst_factor_in"] = in.dst_factor_in;
      j["src_factor_out"] = in.src_factor_out;
      j["src_factor_in"] = in.src_factor_in;
      if (in.opcode == Opcode::kGemm) {
        j["wgt_factor_out"] = in.wgt_factor_out;
        j["wgt_factor_in"] = in.wgt_factor_in;
      } else {
        j["alu_op"] = std::string(to_string(in.alu_op));
        j["use_imm"] = in.use_imm;
        j["imm"] = in.imm;
      }
      break;
    case Opcode::kFinish: break;
  }
  return j;
}

Instruction from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw CodegenError("instruction must be a JSON object");
  Instruction in;
  try {
    in.opcode = opcode_from_string(j.at("opcode").get<std::string>());
    in.pop_prev = j.value("pop_prev", false);
    in.pop_next = j.value("pop_next", false);
    in.push_prev = j.value("push_prev", false);
    in.push_next = j.value("push_next", false);
    if (in.is_mem()) {
      in.mem_kind = mem_kind_from_string(j.at("mem_kind").get<std::string>());
      in.sram_base = j.value("sram_base", 0U);
      in.dram_base = j.value("dram_base", std::uint64_t{0});
      in.y_size = j.value("y_size", 0U);
      in.x_size = j.value("x_size", 0U);
      in.x_stride = j.value("x_stride", 0U);
      in.y_pad_0 = j.value("y_pad_0", 0U);
      in.y_pad_1 = j.value("y_pad_1", 0U);
      in.x_pad_0 = j.value("x_pad_0", 0U);
      in.x_pad_1 = j.value("x_pad_1", 0U);
      in.pad_kind = pad_kind_from_string(j.value("pad_kind", std::string("zero")));
    } else if (in.opcode == Opcode::kGemm || in.opcode == Opcode::kAlu) {
      in.reset = j.value("reset", false);
      in.uop_begin = j.value("uop_begin", 0U);
      in.uop_end = j.value("uop_end", 0U);
      in.iter_out = j.value("iter_out", 0U);
      in.iter_in = j.value("iter_in", 0U);
      in.dst_factor_out = j.value("dst_factor_out", 0U);
      in.dst_factor_in = j.value("dst_factor_in", 0U);
      in.src_factor_out = j.value("src_factor_out", 0U);
      in.src_factor_in = j.value("src_factor_in", 0U);
      if (in.opcode == Opcode::kGemm) {
        in.wgt_factor_out = j.value("wgt_factor_out", 0U);
        in.wgt_factor_in = j.value("wgt_factor_in", 0U);
      } else {
        in.alu_op = alu_op_from_string(j.at("alu_op").get<std::string>());
        in.use_imm = j.value("use_imm", false);
        in.imm = j.value("imm", 0);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw CodegenError(std::string("malformed instruction: ") + e.what());
  } catch (const Error& e) {
    throw CodegenError(std::string("malformed instruction: ") + e.what());
  }
  return in;
}

void check_index(const char* what, std::uint64_t value, std::int64_t limit, std::size_t at) {
  if (static_cast<std::int64_t>(value) > limit) {
    throw CodegenError("index overflow: instruction " + std::to_string(at) + " " + what + "=" +
                       std::to_string(value) + " exceeds " + std::to_string(limit));
  }
}

}  // namespace

std::string_view to_string(DepQueue q) {
  switch (q) {
    case DepQueue::kLdToCmp: return "LD->CMP";
    case DepQueue::kCmpToLd: return "CMP->LD";
    case DepQueue::kCmpToSt: return "CMP->ST";
    case DepQueue::kStToCmp: return "ST->CMP";
  }
  return "?";
}

std::string_view to_string(Module m) {
  switch (m) {
    case Module::kLoad: return "load";
    case Module::kCompute: return "compute";
    case Module::kStore: return "store";
  }
  return "?";
}

Module Instruction::module() const {
  if (opcode == Opcode::kStore) return Module::kStore;
  if (opcode == Opcode::kLoad && (mem_kind == MemKind::kInp || mem_kind == MemKind::kWgt)) {
    return Module::kLoad;
  }
  return Module::kCompute;
}

int Instruction::pop_prev_queue() const {
  switch (module()) {
    case Module::kLoad: return -1;
    case Module::kCompute: return static_cast<int>(DepQueue::kLdToCmp);
    case Module::kStore: return static_cast<int>(DepQueue::kCmpToSt);
  }
  return -1;
}

int Instruction::pop_next_queue() const {
  switch (module()) {
    case Module::kLoad: return static_cast<int>(DepQueue::kCmpToLd);
    case Module::kCompute: return static_cast<int>(DepQueue::kStToCmp);
    case Module::kStore: return -1;
  }
  return -1;
}

int Instruction::push_prev_queue() const {
  switch (module()) {
    case Module::kLoad: return -1;
    case Module::kCompute: return static_cast<int>(DepQueue::kCmpToLd);
    case Module::kStore: return static_cast<int>(DepQueue::kStToCmp);
  }
  return -1;
}

int Instruction::push_next_queue() const {
  switch (module()) {
    case Module::kLoad: return static_cast<int>(DepQueue::kLdToCmp);
    case Module::kCompute: return static_cast<int>(DepQueue::kCmpToSt);
    case Module::kStore: return -1;
  }
  return -1;
}

std::string Instruction::to_string() const {
  std::ostringstream os;
  os << accel::to_string(opcode);
  if (is_mem()) os << ' ' << accel::to_string(mem_kind);
  if (opcode == Opcode::kGemm && reset) os << " reset";
  if (opcode == Opcode::kAlu) os << ' ' << accel::to_string(alu_op);
  return os.str();
}

Instruction Instruction::load(MemKind kind, std::uint32_t sram, std::uint64_t dram,
                              std::uint32_t y, std::uint32_t x, std::uint32_t stride) {
  Instruction in;
  in.opcode = Opcode::kLoad;
  in.mem_kind = kind;
  in.sram_base = sram;
  in.dram_base = dram;
  in.y_size = y;
  in.x_size = x;
  in.x_stride = stride;
  return in;
}

Instruction Instruction::store(std::uint32_t sram, std::uint64_t dram, std::uint32_t y,
                               std::uint32_t x, std::uint32_t stride) {
  Instruction in = load(MemKind::kOut, sram, dram, y, x, stride);
  in.opcode = Opcode::kStore;
  return in;
}

Instruction Instruction::finish() {
  Instruction in;
  in.opcode = Opcode::kFinish;
  return in;
}

std::array<std::uint64_t, 2> encode_instruction(const Instruction& insn,
                                                const InstructionLayout& layout) {
  const FormatLayout& f = layout.for_opcode(insn.opcode);
  Words w{0, 0};
  for (const Field& field : f.fields) {
    const std::uint64_t v = field_value(insn, field.name, field.bits);
    if (field.bits < 64 && (v >> field.bits) != 0) {
      throw CodegenError("index overflow: " + std::string(to_string(insn.opcode)) + "." +
                         field.name + "=" + std::to_string(v) + " does not fit " +
                         std::to_string(field.bits) + " bits");
    }
    put_bits(w, field.offset, field.bits, v);
  }
  return w;
}

Instruction decode_instruction(const std::array<std::uint64_t, 2>& words,
                               const InstructionLayout& layout) {
  const auto op = static_cast<Opcode>(get_bits(words, 0, 3));
  if (static_cast<int>(op) > static_cast<int>(Opcode::kFinish)) {
    throw CodegenError("invalid opcode " + std::to_string(static_cast<int>(op)));
  }
  Instruction in;
  for (const Field& field : layout.for_opcode(op).fields) {
    set_field(in, field.name, get_bits(words, field.offset, field.bits), field.bits);
  }
  return in;
}

std::uint64_t encode_uop(const Uop& uop, const InstructionLayout& layout) {
  Words w{0, 0};
  const std::uint32_t values[3] = {uop.acc_idx, uop.inp_idx, uop.wgt_idx};
  for (std::size_t i = 0; i < layout.uop.fields.size(); ++i) {
    const Field& field = layout.uop.fields[i];
    if ((std::uint64_t{values[i]} >> field.bits) != 0) {
      throw CodegenError("index overflow: uop." + field.name + "=" + std::to_string(values[i]) +
                         " does not fit " + std::to_string(field.bits) + " bits");
    }
    put_bits(w, field.offset, field.bits, values[i]);
  }
  return w[0];
}

Uop decode_uop(std::uint64_t word, const InstructionLayout& layout) {
  const Words w{word, 0};
  const auto& f = layout.uop.fields;
  return {static_cast<std::uint32_t>(get_bits(w, f[0].offset, f[0].bits)),
          static_cast<std::uint32_t>(get_bits(w, f[1].offset, f[1].bits)),
          static_cast<std::uint32_t>(get_bits(w, f[2].offset, f[2].bits))};
}

std::string encode_stream(const InstructionStream& stream, const AccelConfig& cfg) {
  const InstructionLayout layout = derive_instruction_layout(cfg);
  std::string out(kMagic, 4);
  put_u64(out, kVersion, 4);
  put_u64(out, stream.insns.size(), 8);
  put_u64(out, stream.uops.size(), 8);
  for (const Instruction& in : stream.insns) {
    const auto w = encode_instruction(in, layout);
    put_u64(out, w[0], 8);
    put_u64(out, w[1], 8);
  }
  for (const Uop& u : stream.uops) put_u64(out, encode_uop(u, layout), cfg.uop_bits / 8);
  return out;
}

InstructionStream decode_stream(std::string_view bytes, const AccelConfig& cfg) {
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CodegenError("not a binary instruction stream");
  }
  std::size_t pos = 4;
  if (get_u64(bytes, pos, 4) != kVersion) throw CodegenError("unsupported stream version");
  const std::uint64_t n_insn = get_u64(bytes, pos, 8);
  const std::uint64_t n_uop = get_u64(bytes, pos, 8);
  const InstructionLayout layout = derive_instruction_layout(cfg);
  InstructionStream s;
  s.insns.reserve(n_insn);
  for (std::uint64_t i = 0; i < n_insn; ++i) {
    Words w{};
    w[0] = get_u64(bytes, pos, 8);
    w[1] = get_u64(bytes, pos, 8);
    s.insns.push_back(decode_instruction(w, layout));
  }
  s.uops.reserve(n_uop);
  for (std::uint64_t i = 0; i < n_uop; ++i) {
    s.uops.push_back(decode_uop(get_u64(bytes, pos, cfg.uop_bits / 8), layout));
  }
  if (pos != bytes.size()) throw CodegenError("trailing bytes after binary stream");
  return s;
}

std::string stream_to_jsonl(const InstructionStream& stream) {
  nlohmann::ordered_json header;
  header["format"] = "accel-stream";
  header["version"] = kVersion;
  header["instructions"] = stream.insns.size();
  auto uops = nlohmann::ordered_json::array();
  for (const Uop& u : stream.uops) uops.push_back({u.acc_idx, u.inp_idx, u.wgt_idx});
  header["uops"] = std::move(uops);
  std::string out = header.dump() + "\n";
  for (const Instruction& in : stream.insns) out += to_json(in).dump() + "\n";
  return out;
}

InstructionStream stream_from_jsonl(std::string_view text) {
  InstructionStream s;
  std::istringstream is{std::string(text)};
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CodegenError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!header_seen) {
      header_seen = true;
      if (j.is_object() && j.contains("format")) {
        if (j["format"] != "accel-stream") throw CodegenError("unknown stream format");
        for (const auto& u : j.value("uops", nlohmann::json::array())) {
          if (!u.is_array() || u.size() != 3) throw CodegenError("uop must be [acc, inp, wgt]");
          s.uops.push_back({u[0].get<std::uint32_t>(), u[1].get<std::uint32_t>(),
                            u[2].get<std::uint32_t>()});
        }
        continue;
      }
    }
    s.insns.push_back(from_json(j));
  }
  return s;
}

std::string instruction_to_json(const Instruction& insn) { return to_json(insn).dump(); }

Instruction instruction_from_json(std::string_view text) {
  try {
    return from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw CodegenError(std::string("malformed instruction: ") + e.what());
  }
}

void check_stream_fits(const InstructionStream& stream, const AccelConfig& cfg) {
  const InstructionLayout layout = derive_instruction_layout(cfg);
  const std::int64_t uop_entries = cfg.entries(MemKind::kUop);
  for (std::size_t i = 0; i < stream.insns.size(); ++i) {
    const Instruction& in = stream.insns[i];
    encode_instruction(in, layout);
    if (in.is_mem()) {
      const std::int64_t entries = cfg.entries(in.mem_kind);
      const std::uint64_t rows = in.opcode == Opcode::kLoad ? in.sram_rows() : in.y_size;
      const std::uint64_t cols = in.opcode == Opcode::kLoad ? in.sram_cols() : in.x_size;
      check_index("sram_base + extent", in.sram_base + rows * cols, entries, i);
      if (in.mem_kind == MemKind::kUop) {
        check_index("dram_base + x_size", in.dram_base + in.x_size,
                    static_cast<std::int64_t>(stream.uops.size()), i);
      }
    } else if (in.opcode == Opcode::kGemm || in.opcode == Opcode::kAlu) {
      if (in.uop_begin > in.uop_end) {
        throw CodegenError("index overflow: instruction " + std::to_string(i) +
                           " uop_begin > uop_end");
      }
      check_index("uop_end", in.uop_end, uop_entries, i);
    }
  }
  for (std::size_t i = 0; i < stream.uops.size(); ++i) encode_uop(stream.uops[i], layout);
}

}  // namespace accel
