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
 * \file common.hpp
 * \brief Error types, memory kinds and small integer helpers shared by all modules.
 */
#ifndef ACCEL_COMMON_HPP_
#define ACCEL_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace accel {

/*! \brief Base class of every error raised by the library. */
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/*! \brief Malformed or inconsistent machine configuration. */
class ConfigError : public Error {
 public:
  using Error::Error;
};

/*! \brief Instruction or uop fields cannot be packed into their fixed word width. */
class LayoutError : public Error {
 public:
  using Error::Error;
};

/*! \brief Invalid workload shape. */
class WorkloadError : public Error {
 public:
  using Error::Error;
};

/*! \brief No tiling fits the scratchpads, or a tiling is not valid for the layer. */
class TilingError : public Error {
 public:
  using Error::Error;
};

/*! \brief Stream generation, encoding or decoding failure. */
class CodegenError : public Error {
 public:
  using Error::Error;
};

/*! \brief Floorplan description or construction failure. */
class FloorplanError : public Error {
 public:
  using Error::Error;
};

/*! \brief Scratchpad / DRAM region kinds. INS only appears in tensor_bits. */
enum class MemKind : std::uint8_t { kInp = 0, kWgt = 1, kAcc = 2, kUop = 3, kOut = 4, kIns = 5 };

std::string_view to_string(MemKind kind);
MemKind mem_kind_from_string(std::string_view name);

enum class Opcode : std::uint8_t { kLoad = 0, kStore = 1, kGemm = 2, kAlu = 3, kFinish = 4 };

enum class AluOp : std::uint8_t { kAdd = 0, kMax = 1, kMin = 2, kShr = 3, kMul = 4, kClip = 5 };

/*! \brief Value written into padded scratchpad entries by a LOAD. */
enum class PadKind : std::uint8_t { kZero = 0, kMinValue = 1 };

std::string_view to_string(Opcode op);
std::string_view to_string(AluOp op);
std::string_view to_string(PadKind pad);
Opcode opcode_from_string(std::string_view name);
AluOp alu_op_from_string(std::string_view name);
PadKind pad_kind_from_string(std::string_view name);

inline constexpr bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

/*! \brief Smallest b with 2^b >= v (0 for v <= 1). */
inline constexpr int ceil_log2(std::uint64_t v) {
  int bits = 0;
  while ((std::uint64_t{1} << bits) < v) ++bits;
  return bits;
}

/*! \brief Number of bits needed to hold values 0..v inclusive. */
inline constexpr int bits_for_value(std::uint64_t v) {
  int bits = 0;
  while (bits < 64 && (v >> bits) != 0) ++bits;
  return bits;
}

inline constexpr std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

/*! \brief Floor division that rounds toward negative infinity. */
inline constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/*! \brief Two's complement wrap of v to a signed integer of the given width. */
inline constexpr std::int64_t wrap_signed(std::int64_t v, int bits) {
  if (bits >= 64) return v;
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::uint64_t u = static_cast<std::uint64_t>(v) & mask;
  const std::uint64_t sign = std::uint64_t{1} << (bits - 1);
  if (u & sign) u |= ~mask;
  return static_cast<std::int64_t>(u);
}

inline constexpr std::int64_t signed_min(int bits) { return -(std::int64_t{1} << (bits - 1)); }
inline constexpr std::int64_t signed_max(int bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

}  // namespace accel

#endif  // ACCEL_COMMON_HPP_
