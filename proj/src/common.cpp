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

#include "accel/common.hpp"

#include <array>
#include <utility>

namespace accel {

namespace {

template <typename E, std::size_t N>
E lookup(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view name,
         const char* what) {
  for (const auto& [value, text] : table) {
    if (text == name) return value;
  }
  throw Error(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
  for (const auto& [v, text] : table) {
    if (v == value) return text;
  }
  return "?";
}

constexpr std::array<std::pair<MemKind, std::string_view>, 6> kMemKinds{{
    {MemKind::kInp, "INP"},
    {MemKind::kWgt, "WGT"},
    {MemKind::kAcc, "ACC"},
    {MemKind::kUop, "UOP"},
    {MemKind::kOut, "OUT"},
    {MemKind::kIns, "INS"},
}};

constexpr std::array<std::pair<Opcode, std::string_view>, 5> kOpcodes{{
    {Opcode::kLoad, "LOAD"},
    {Opcode::kStore, "STORE"},
    {Opcode::kGemm, "GEMM"},
    {Opcode::kAlu, "ALU"},
    {Opcode::kFinish, "FINISH"},
}};

constexpr std::array<std::pair<AluOp, std::string_view>, 6> kAluOps{{
    {AluOp::kAdd, "ADD"},
    {AluOp::kMax, "MAX"},
    {AluOp::kMin, "MIN"},
    {AluOp::kShr, "SHR"},
    {AluOp::kMul, "MUL"},
    {AluOp::kClip, "CLIP"},
}};

constexpr std::array<std::pair<PadKind, std::string_view>, 2> kPadKinds{{
    {PadKind::kZero, "zero"},
    {PadKind::kMinValue, "min_value"},
}};

}  // namespace

std::string_view to_string(MemKind kind) { return name_of(kMemKinds, kind); }
std::string_view to_string(Opcode op) { return name_of(kOpcodes, op); }
std::string_view to_string(AluOp op) { return name_of(kAluOps, op); }
std::string_view to_string(PadKind pad) { return name_of(kPadKinds, pad); }

MemKind mem_kind_from_string(std::string_view name) { return lookup(kMemKinds, name, "mem_kind"); }
Opcode opcode_from_string(std::string_view name) { return lookup(kOpcodes, name, "opcode"); }
AluOp alu_op_from_string(std::string_view name) { return lookup(kAluOps, name, "alu_op"); }
PadKind pad_kind_from_string(std::string_view name) { return lookup(kPadKinds, name, "pad_kind"); }

}  // namespace accel
