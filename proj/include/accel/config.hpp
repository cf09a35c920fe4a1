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
 * \file config.hpp
 * \brief Machine parameters and the derived instruction / uop field layout.
 *
 * The JSON document is the single source of every machine parameter. Keys not
 * listed in AccelConfig are rejected. See docs/config.md for the schema.
 */
#ifndef ACCEL_CONFIG_HPP_
#define ACCEL_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "accel/common.hpp"

namespace accel {

struct AccelConfig {
  // GEMM core shape
  int batch = 1;
  int block_in = 16;
  int block_out = 16;

  // element widths, bits
  int inp_elem_bits = 8;
  int wgt_elem_bits = 8;
  int acc_elem_bits = 32;
  int out_elem_bits = 8;
  int uop_bits = 32;
  int ins_bits = 128;

  // scratchpad capacities, bytes
  std::int64_t c_inp = 32 * 1024;
  std::int64_t c_wgt = 256 * 1024;
  std::int64_t c_acc = 128 * 1024;
  std::int64_t c_uop = 32 * 1024;

  // memory system
  int axi_data_bits = 64;
  int dram_latency_cycles = 32;
  int vme_max_inflight = 16;

  // execution units
  int gemm_ii = 1;
  int alu_ii_imm = 1;
  int alu_ii_two = 2;
  int gemm_pipeline_depth = 4;

  // instruction field widths that are not derived from scratchpad sizes
  int loop_extent_bits = 14;
  int memop_size_bits = 16;
  int memop_stride_bits = 16;
  int dram_addr_bits = 32;
  int pad_bits = 4;
  int alu_imm_bits = 16;

  friend bool operator==(const AccelConfig&, const AccelConfig&) = default;

  /*! \brief Throws ConfigError naming the first offending field. */
  void validate() const;

  /*! \brief Number of entries (tiles) in the scratchpad of the given kind. OUT mirrors ACC. */
  std::int64_t entries(MemKind kind) const;

  std::int64_t macs_per_cycle() const {
    return static_cast<std::int64_t>(batch) * block_in * block_out;
  }
};

/*! \brief Parse a JSON configuration document; defaults fill omitted keys. */
AccelConfig load_config(std::string_view json_text);
AccelConfig load_config_file(const std::string& path);

/*! \brief Canonical JSON (fixed key order, every key present). */
std::string serialize_config(const AccelConfig& cfg);

/*! \brief Bits in one scratchpad entry of the given kind. */
std::int64_t tensor_bits(const AccelConfig& cfg, MemKind kind);

inline std::int64_t tensor_bytes(const AccelConfig& cfg, MemKind kind) {
  return tensor_bits(cfg, kind) / 8;
}

/*! \brief Compute roof: two ops (multiply and add) per MAC lane per cycle. */
std::int64_t peak_ops_per_cycle(const AccelConfig& cfg);

enum class FieldClass : std::uint8_t {
  kFixed,   // opcode, flags, fixed-width payloads
  kIndex,   // scratchpad addresses, never shrunk
  kExtent,  // loop trip counts and transfer sizes, shrunk first
  kStride,  // per-loop index increments and DRAM strides, shrunk second
};

struct Field {
  std::string name;
  int bits = 0;
  FieldClass cls = FieldClass::kFixed;
  int offset = 0;  // LSB position inside the word
};

/*! \brief Ordered fields of one instruction format (or of the uop word). */
struct FormatLayout {
  std::string name;
  std::vector<Field> fields;

  int total_bits() const;
  const Field& field(std::string_view name) const;
  bool has(std::string_view name) const;
};

struct InstructionLayout {
  int ins_bits = 128;
  int uop_bits = 32;
  FormatLayout mem;     // LOAD and STORE
  FormatLayout gemm;
  FormatLayout alu;
  FormatLayout finish;
  FormatLayout uop;
  /*! \brief Human readable shrink log, one entry per bit removed. */
  std::vector<std::string> shrink_log;

  const FormatLayout& for_opcode(Opcode op) const;

  friend bool operator==(const InstructionLayout& a, const InstructionLayout& b);
};

/*!
 * \brief Size every field for the configuration and fit each format into the
 *  128-bit instruction word.
 *
 * Index fields are sized as ceil(log2(entries)). When a format exceeds the
 * instruction width, extent fields are shrunk one bit at a time (widest first)
 * down to kMinExtentBits, then stride fields down to kMinStrideBits. Index
 * fields never shrink. Throws LayoutError ("instruction overflow" / "uop
 * overflow") with per-field accounting when no legal shrink exists.
 */
InstructionLayout derive_instruction_layout(const AccelConfig& cfg);

inline constexpr int kMinExtentBits = 8;
inline constexpr int kMinStrideBits = 8;

std::string describe_layout(const InstructionLayout& layout);

}  // namespace accel

#endif  // ACCEL_CONFIG_HPP_
