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
 * \file isa.hpp
 * \brief Decoded instructions, uops, instruction streams and their encodings.
 */
#ifndef ACCEL_ISA_HPP_
#define ACCEL_ISA_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "accel/config.hpp"

namespace accel {

/*!
 * \brief Micro-op. GEMM reads all three indices; ALU uses acc_idx as the
 *  destination and inp_idx as the source accumulator entry.
 */
struct Uop {
  std::uint32_t acc_idx = 0;
  std::uint32_t inp_idx = 0;
  std::uint32_t wgt_idx = 0;
  friend bool operator==(const Uop&, const Uop&) = default;
};

/*! \brief Dependency token queues, named by producer and consumer. */
enum class DepQueue : std::uint8_t { kLdToCmp = 0, kCmpToLd = 1, kCmpToSt = 2, kStToCmp = 3 };

inline constexpr int kNumDepQueues = 4;
std::string_view to_string(DepQueue q);

/*! \brief Executing module of an instruction. */
enum class Module : std::uint8_t { kLoad = 0, kCompute = 1, kStore = 2 };

std::string_view to_string(Module m);

struct Instruction {
  Opcode opcode = Opcode::kFinish;
  bool pop_prev = false;
  bool pop_next = false;
  bool push_prev = false;
  bool push_next = false;

  // LOAD / STORE
  MemKind mem_kind = MemKind::kInp;
  std::uint32_t sram_base = 0;
  std::uint64_t dram_base = 0;  // in tiles of mem_kind
  std::uint32_t y_size = 0;
  std::uint32_t x_size = 0;
  std::uint32_t x_stride = 0;
  std::uint32_t y_pad_0 = 0;
  std::uint32_t y_pad_1 = 0;
  std::uint32_t x_pad_0 = 0;
  std::uint32_t x_pad_1 = 0;
  PadKind pad_kind = PadKind::kZero;

  // GEMM / ALU
  bool reset = false;
  std::uint32_t uop_begin = 0;
  std::uint32_t uop_end = 0;
  std::uint32_t iter_out = 0;
  std::uint32_t iter_in = 0;
  std::uint32_t dst_factor_out = 0;  // acc index increments
  std::uint32_t dst_factor_in = 0;
  std::uint32_t src_factor_out = 0;  // GEMM: inp increments; ALU: acc source increments
  std::uint32_t src_factor_in = 0;
  std::uint32_t wgt_factor_out = 0;
  std::uint32_t wgt_factor_in = 0;

  // ALU
  AluOp alu_op = AluOp::kAdd;
  bool use_imm = false;
  std::int32_t imm = 0;

  friend bool operator==(const Instruction&, const Instruction&) = default;

  bool is_mem() const { return opcode == Opcode::kLoad || opcode == Opcode::kStore; }
  Module module() const;
  /*! \brief Queue popped by pop_prev / pop_next and pushed by push_prev / push_next; -1 if none. */
  int pop_prev_queue() const;
  int pop_next_queue() const;
  int push_prev_queue() const;
  int push_next_queue() const;
  /*! \brief Scratchpad entries written including pad, for LOAD. */
  std::uint64_t sram_rows() const { return y_size + y_pad_0 + y_pad_1; }
  std::uint64_t sram_cols() const { return x_size + x_pad_0 + x_pad_1; }
  std::uint64_t pad_entries() const { return sram_rows() * sram_cols() - std::uint64_t{y_size} * x_size; }

  std::string to_string() const;

  static Instruction load(MemKind kind, std::uint32_t sram, std::uint64_t dram, std::uint32_t y,
                          std::uint32_t x, std::uint32_t stride);
  static Instruction store(std::uint32_t sram, std::uint64_t dram, std::uint32_t y,
                           std::uint32_t x, std::uint32_t stride);
  static Instruction finish();
};

struct ConvPlan;

struct InstructionStream {
  std::vector<Instruction> insns;
  /*! \brief DRAM uop image; UOP LOAD dram_base indexes into it. */
  std::vector<Uop> uops;
  /*! \brief Logical schedule behind a generated conv stream; null otherwise. */
  std::shared_ptr<const ConvPlan> plan;

  /*! \brief Two streams are equal when instructions and uops match. */
  friend bool operator==(const InstructionStream& a, const InstructionStream& b) {
    return a.insns == b.insns && a.uops == b.uops;
  }
};

/*! \brief Throws CodegenError "index overflow" if any field exceeds its width. */
std::array<std::uint64_t, 2> encode_instruction(const Instruction& insn,
                                                const InstructionLayout& layout);
Instruction decode_instruction(const std::array<std::uint64_t, 2>& words,
                               const InstructionLayout& layout);
std::uint64_t encode_uop(const Uop& uop, const InstructionLayout& layout);
Uop decode_uop(std::uint64_t word, const InstructionLayout& layout);

/*! \brief Binary image: header, 16 bytes per instruction, uop_bits/8 bytes per uop. */
std::string encode_stream(const InstructionStream& stream, const AccelConfig& cfg);
InstructionStream decode_stream(std::string_view bytes, const AccelConfig& cfg);

/*! \brief JSON lines: a header line with the uop image, then one instruction per line. */
std::string stream_to_jsonl(const InstructionStream& stream);
InstructionStream stream_from_jsonl(std::string_view text);

std::string instruction_to_json(const Instruction& insn);
Instruction instruction_from_json(std::string_view text);

/*!
 * \brief Check every index and extent of a stream against the layout and the
 *  scratchpad sizes. Throws CodegenError "index overflow" naming the field.
 */
void check_stream_fits(const InstructionStream& stream, const AccelConfig& cfg);

}  // namespace accel

#endif  // ACCEL_ISA_HPP_
