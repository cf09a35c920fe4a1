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

#include "accel/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <variant>

#include "json.hpp"

namespace accel {

namespace {

using Member = std::variant<int AccelConfig::*, std::int64_t AccelConfig::*>;

struct KeyDef {
  const char* key;
  Member member;
};

// Canonical key order of the serialized document.
const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      {"batch", &AccelConfig::batch},
      {"block_in", &AccelConfig::block_in},
      {"block_out", &AccelConfig::block_out},
      {"inp_elem_bits", &AccelConfig::inp_elem_bits},
      {"wgt_elem_bits", &AccelConfig::wgt_elem_bits},
      {"acc_elem_bits", &AccelConfig::acc_elem_bits},
      {"out_elem_bits", &AccelConfig::out_elem_bits},
      {"uop_bits", &AccelConfig::uop_bits},
      {"ins_bits", &AccelConfig::ins_bits},
      {"c_inp", &AccelConfig::c_inp},
      {"c_wgt", &AccelConfig::c_wgt},
      {"c_acc", &AccelConfig::c_acc},
      {"c_uop", &AccelConfig::c_uop},
      {"axi_data_bits", &AccelConfig::axi_data_bits},
      {"dram_latency_cycles", &AccelConfig::dram_latency_cycles},
      {"vme_max_inflight", &AccelConfig::vme_max_inflight},
      {"gemm_ii", &AccelConfig::gemm_ii},
      {"alu_ii_imm", &AccelConfig::alu_ii_imm},
      {"alu_ii_two", &AccelConfig::alu_ii_two},
      {"gemm_pipeline_depth", &AccelConfig::gemm_pipeline_depth},
      {"loop_extent_bits", &AccelConfig::loop_extent_bits},
      {"memop_size_bits", &AccelConfig::memop_size_bits},
      {"memop_stride_bits", &AccelConfig::memop_stride_bits},
      {"dram_addr_bits", &AccelConfig::dram_addr_bits},
      {"pad_bits", &AccelConfig::pad_bits},
      {"alu_imm_bits", &AccelConfig::alu_imm_bits},
  };
  return table;
}

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

void require_pow2(const char* field, std::int64_t v) {
  if (!is_pow2(static_cast<std::uint64_t>(v < 0 ? 0 : v))) {
    fail(field, std::to_string(v) + " is not a power of 2");
  }
}

void require_range(const char* field, std::int64_t v, std::int64_t lo, std::int64_t hi) {
  if (v < lo || v > hi) {
    fail(field, std::to_string(v) + " is outside [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
  }
}

}  // namespace

void AccelConfig::validate() const {
  require_pow2("batch", batch);
  require_pow2("block_in", block_in);
  require_pow2("block_out", block_out);
  require_range("batch", batch, 1, 64);
  require_range("block_in", block_in, 1, 256);
  require_range("block_out", block_out, 1, 256);

  const std::pair<const char*, int> elem_widths[] = {
      {"inp_elem_bits", inp_elem_bits},
      {"wgt_elem_bits", wgt_elem_bits},
      {"out_elem_bits", out_elem_bits},
  };
  for (const auto& [name, bits] : elem_widths) {
    require_pow2(name, bits);
    require_range(name, bits, 2, 32);
  }
  require_pow2("acc_elem_bits", acc_elem_bits);
  require_range("acc_elem_bits", acc_elem_bits, 8, 32);
  require_pow2("uop_bits", uop_bits);
  require_range("uop_bits", uop_bits, 16, 64);
  if (ins_bits != 128) fail("ins_bits", std::to_string(ins_bits) + " must be 128");

  if (axi_data_bits != 64 && axi_data_bits != 128 && axi_data_bits != 256 &&
      axi_data_bits != 512) {
    fail("axi_data_bits", std::to_string(axi_data_bits) + " is not one of {64,128,256,512}");
  }

  // Every tile must be a whole number of bytes so DRAM addressing stays byte exact.
  const std::pair<const char*, MemKind> tiles[] = {
      {"inp_elem_bits", MemKind::kInp},
      {"wgt_elem_bits", MemKind::kWgt},
      {"acc_elem_bits", MemKind::kAcc},
      {"out_elem_bits", MemKind::kOut},
  };
  for (const auto& [name, kind] : tiles) {
    const auto bits = tensor_bits(*this, kind);
    if (bits % 8 != 0) fail(name, "tile of " + std::to_string(bits) + " bits is not byte aligned");
    const auto ratio_ok = bits >= axi_data_bits ? is_pow2(bits / axi_data_bits)
                                                : is_pow2(axi_data_bits / bits);
    if (!ratio_ok) fail(name, "tile to bus width ratio is not a power of 2");
  }
  if (!is_pow2(axi_data_bits / uop_bits)) fail("uop_bits", "bus to uop width ratio is not a power of 2");

  const std::tuple<const char*, std::int64_t, MemKind> caps[] = {
      {"c_inp", c_inp, MemKind::kInp},
      {"c_wgt", c_wgt, MemKind::kWgt},
      {"c_acc", c_acc, MemKind::kAcc},
      {"c_uop", c_uop, MemKind::kUop},
  };
  for (const auto& [name, bytes, kind] : caps) {
    require_pow2(name, bytes);
    require_range(name, bytes, 1, std::int64_t{1} << 32);
    if (bytes * 8 <= tensor_bits(*this, kind)) {
      fail(name, std::to_string(bytes) + " bytes does not exceed one " +
                     std::string(to_string(kind)) + " tile");
    }
  }

  require_range("dram_latency_cycles", dram_latency_cycles, 1, 100000);
  require_range("vme_max_inflight", vme_max_inflight, 1, 4096);
  require_range("gemm_ii", gemm_ii, 1, 16);
  require_range("alu_ii_imm", alu_ii_imm, 1, 16);
  require_range("alu_ii_two", alu_ii_two, 1, 16);
  require_range("gemm_pipeline_depth", gemm_pipeline_depth, 0, 64);
  require_range("loop_extent_bits", loop_extent_bits, kMinExtentBits, 32);
  require_range("memop_size_bits", memop_size_bits, kMinExtentBits, 32);
  require_range("memop_stride_bits", memop_stride_bits, kMinStrideBits, 32);
  require_range("dram_addr_bits", dram_addr_bits, 16, 48);
  require_range("pad_bits", pad_bits, 1, 8);
  require_range("alu_imm_bits", alu_imm_bits, 4, 32);
}

std::int64_t AccelConfig::entries(MemKind kind) const {
  switch (kind) {
    case MemKind::kInp: return c_inp * 8 / tensor_bits(*this, MemKind::kInp);
    case MemKind::kWgt: return c_wgt * 8 / tensor_bits(*this, MemKind::kWgt);
    case MemKind::kAcc:
    case MemKind::kOut: return c_acc * 8 / tensor_bits(*this, MemKind::kAcc);
    case MemKind::kUop: return c_uop * 8 / uop_bits;
    case MemKind::kIns: return 0;
  }
  return 0;
}

std::int64_t tensor_bits(const AccelConfig& cfg, MemKind kind) {
  switch (kind) {
    case MemKind::kInp: return std::int64_t{cfg.batch} * cfg.block_in * cfg.inp_elem_bits;
    case MemKind::kWgt: return std::int64_t{cfg.block_out} * cfg.block_in * cfg.wgt_elem_bits;
    case MemKind::kAcc: return std::int64_t{cfg.batch} * cfg.block_out * cfg.acc_elem_bits;
    case MemKind::kOut: return std::int64_t{cfg.batch} * cfg.block_out * cfg.out_elem_bits;
    case MemKind::kUop: return cfg.uop_bits;
    case MemKind::kIns: return cfg.ins_bits;
  }
  return 0;
}

std::int64_t peak_ops_per_cycle(const AccelConfig& cfg) { return 2 * cfg.macs_per_cycle(); }

AccelConfig load_config(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config parse error: top level must be an object");

  AccelConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    const auto& table = key_table();
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const KeyDef& d) { return key == d.key; });
    if (it == table.end()) fail(key, "unknown configuration key");
    if (!value.is_number_integer()) fail(key, "expected an integer");
    const auto v = value.get<std::int64_t>();
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) {
            fail(key, "value out of range");
          }
          cfg.*member = static_cast<T>(v);
        },
        it->member);
  }
  cfg.validate();
  return cfg;
}

AccelConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

std::string serialize_config(const AccelConfig& cfg) {
  nlohmann::ordered_json doc;
  for (const auto& def : key_table()) {
    std::visit([&](auto member) { doc[def.key] = cfg.*member; }, def.member);
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Instruction layout

int FormatLayout::total_bits() const {
  int sum = 0;
  for (const auto& f : fields) sum += f.bits;
  return sum;
}

const Field& FormatLayout::field(std::string_view field_name) const {
  for (const auto& f : fields) {
    if (f.name == field_name) return f;
  }
  throw LayoutError("format " + name + " has no field '" + std::string(field_name) + "'");
}

bool FormatLayout::has(std::string_view field_name) const {
  return std::any_of(fields.begin(), fields.end(),
                     [&](const Field& f) { return f.name == field_name; });
}

const FormatLayout& InstructionLayout::for_opcode(Opcode op) const {
  switch (op) {
    case Opcode::kLoad:
    case Opcode::kStore: return mem;
    case Opcode::kGemm: return gemm;
    case Opcode::kAlu: return alu;
    case Opcode::kFinish: return finish;
  }
  return finish;
}

bool operator==(const InstructionLayout& a, const InstructionLayout& b) {
  auto same = [](const FormatLayout& x, const FormatLayout& y) {
    if (x.name != y.name || x.fields.size() != y.fields.size()) return false;
    for (std::size_t i = 0; i < x.fields.size(); ++i) {
      const auto& f = x.fields[i];
      const auto& g = y.fields[i];
      if (f.name != g.name || f.bits != g.bits || f.cls != g.cls || f.offset != g.offset) return false;
    }
    return true;
  };
  return a.ins_bits == b.ins_bits && a.uop_bits == b.uop_bits && same(a.mem, b.mem) &&
         same(a.gemm, b.gemm) && same(a.alu, b.alu) && same(a.finish, b.finish) &&
         same(a.uop, b.uop);
}

namespace {

void add_header(FormatLayout& f) {
  f.fields.push_back({"opcode", 3, FieldClass::kFixed});
  f.fields.push_back({"pop_prev", 1, FieldClass::kFixed});
  f.fields.push_back({"pop_next", 1, FieldClass::kFixed});
  f.fields.push_back({"push_prev", 1, FieldClass::kFixed});
  f.fields.push_back({"push_next", 1, FieldClass::kFixed});
}

std::string accounting(const FormatLayout& f) {
  std::ostringstream os;
  os << f.name << " uses " << f.total_bits() << " bits:";
  for (const auto& field : f.fields) os << ' ' << field.name << '=' << field.bits;
  return os.str();
}

// Remove one bit at a time from the widest shrinkable field of the given class.
void shrink_class(FormatLayout& f, FieldClass cls, int floor_bits, int budget,
                  std::vector<std::string>& log) {
  while (f.total_bits() > budget) {
    Field* widest = nullptr;
    for (auto& field : f.fields) {
      if (field.cls != cls || field.bits <= floor_bits) continue;
      if (widest == nullptr || field.bits > widest->bits) widest = &field;
    }
    if (widest == nullptr) return;
    --widest->bits;
    log.push_back(f.name + "." + widest->name + " -> " + std::to_string(widest->bits));
  }
}

void fit(FormatLayout& f, int budget, std::vector<std::string>& log, const char* what) {
  if (f.total_bits() > budget) {
    shrink_class(f, FieldClass::kExtent, kMinExtentBits, budget, log);
    shrink_class(f, FieldClass::kStride, kMinStrideBits, budget, log);
  }
  if (f.total_bits() > budget) {
    throw LayoutError(std::string(what) + ": " + accounting(f) + " (limit " +
                      std::to_string(budget) + ")");
  }
  int offset = 0;
  for (auto& field : f.fields) {
    field.offset = offset;
    offset += field.bits;
  }
}

}  // namespace

InstructionLayout derive_instruction_layout(const AccelConfig& cfg) {
  cfg.validate();
  const int inp_idx = ceil_log2(static_cast<std::uint64_t>(cfg.entries(MemKind::kInp)));
  const int wgt_idx = ceil_log2(static_cast<std::uint64_t>(cfg.entries(MemKind::kWgt)));
  const int acc_idx = ceil_log2(static_cast<std::uint64_t>(cfg.entries(MemKind::kAcc)));
  const int uop_idx = ceil_log2(static_cast<std::uint64_t>(cfg.entries(MemKind::kUop)));
  const int uop_end = bits_for_value(static_cast<std::uint64_t>(cfg.entries(MemKind::kUop)));
  const int sram_idx = std::max({inp_idx, wgt_idx, acc_idx, uop_idx});
  const int src_idx = std::max(inp_idx, acc_idx);

  InstructionLayout layout;
  layout.ins_bits = cfg.ins_bits;
  layout.uop_bits = cfg.uop_bits;

  auto& mem = layout.mem;
  mem.name = "MEM";
  add_header(mem);
  mem.fields.push_back({"mem_kind", 3, FieldClass::kFixed});
  mem.fields.push_back({"sram_base", sram_idx, FieldClass::kIndex});
  mem.fields.push_back({"dram_base", cfg.dram_addr_bits, FieldClass::kFixed});
  mem.fields.push_back({"y_size", cfg.memop_size_bits, FieldClass::kExtent});
  mem.fields.push_back({"x_size", cfg.memop_size_bits, FieldClass::kExtent});
  mem.fields.push_back({"x_stride", cfg.memop_stride_bits, FieldClass::kStride});
  mem.fields.push_back({"y_pad_0", cfg.pad_bits, FieldClass::kFixed});
  mem.fields.push_back({"y_pad_1", cfg.pad_bits, FieldClass::kFixed});
  mem.fields.push_back({"x_pad_0", cfg.pad_bits, FieldClass::kFixed});
  mem.fields.push_back({"x_pad_1", cfg.pad_bits, FieldClass::kFixed});
  mem.fields.push_back({"pad_kind", 1, FieldClass::kFixed});

  auto compute_common = [&](FormatLayout& f) {
    add_header(f);
    f.fields.push_back({"reset", 1, FieldClass::kFixed});
    f.fields.push_back({"uop_begin", uop_idx, FieldClass::kIndex});
    f.fields.push_back({"uop_end", uop_end, FieldClass::kIndex});
    f.fields.push_back({"iter_out", cfg.loop_extent_bits, FieldClass::kExtent});
    f.fields.push_back({"iter_in", cfg.loop_extent_bits, FieldClass::kExtent});
  };

  auto& gemm = layout.gemm;
  gemm.name = "GEMM";
  compute_common(gemm);
  gemm.fields.push_back({"acc_factor_out", acc_idx, FieldClass::kStride});
  gemm.fields.push_back({"acc_factor_in", acc_idx, FieldClass::kStride});
  gemm.fields.push_back({"inp_factor_out", inp_idx, FieldClass::kStride});
  gemm.fields.push_back({"inp_factor_in", inp_idx, FieldClass::kStride});
  gemm.fields.push_back({"wgt_factor_out", wgt_idx, FieldClass::kStride});
  gemm.fields.push_back({"wgt_factor_in", wgt_idx, FieldClass::kStride});

  auto& alu = layout.alu;
  alu.name = "ALU";
  compute_common(alu);
  alu.fields.push_back({"dst_factor_out", acc_idx, FieldClass::kStride});
  alu.fields.push_back({"dst_factor_in", acc_idx, FieldClass::kStride});
  alu.fields.push_back({"src_factor_out", acc_idx, FieldClass::kStride});
  alu.fields.push_back({"src_factor_in", acc_idx, FieldClass::kStride});
  alu.fields.push_back({"alu_op", 3, FieldClass::kFixed});
  alu.fields.push_back({"use_imm", 1, FieldClass::kFixed});
  alu.fields.push_back({"imm", cfg.alu_imm_bits, FieldClass::kFixed});

  auto& finish = layout.finish;
  finish.name = "FINISH";
  add_header(finish);

  auto& uop = layout.uop;
  uop.name = "UOP";
  uop.fields.push_back({"acc_idx", acc_idx, FieldClass::kIndex});
  uop.fields.push_back({"inp_idx", src_idx, FieldClass::kIndex});
  uop.fields.push_back({"wgt_idx", wgt_idx, FieldClass::kIndex});

  for (FormatLayout* f : {&mem, &gemm, &alu, &finish}) {
    fit(*f, cfg.ins_bits, layout.shrink_log, "instruction overflow");
  }
  fit(uop, cfg.uop_bits, layout.shrink_log, "uop overflow");
  return layout;
}

std::string describe_layout(const InstructionLayout& layout) {
  std::ostringstream os;
  for (const FormatLayout* f : {&layout.mem, &layout.gemm, &layout.alu, &layout.finish, &layout.uop}) {
    os << accounting(*f) << '\n';
  }
  for (const auto& line : layout.shrink_log) os << "  shrunk " << line << '\n';
  return os.str();
}

}  // namespace accel
