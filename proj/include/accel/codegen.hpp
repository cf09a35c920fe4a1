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
 * \file codegen.hpp
 * \brief Lowering of layers to instruction streams.
 *
 * DRAM tensors are stored tile by tile. With NB = b / batch, DI = fi / block_in,
 * DO = fo / block_out and KK = kh * kw, the tile indices are
 *
 *   INP  ((nb * DI + ci) * h + y) * w + x
 *   WGT  (co * DI + ci) * KK + ky * kw + kx
 *   OUT  ((nb * DO + co) * oh + oy) * ow + ox
 *
 * ALU layers keep their activations in the ACC region with the INP layout
 * (channel blocks of block_out) followed by per-channel weight tiles.
 */
#ifndef ACCEL_CODEGEN_HPP_
#define ACCEL_CODEGEN_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "accel/config.hpp"
#include "accel/isa.hpp"
#include "accel/tps.hpp"
#include "accel/workload.hpp"

namespace accel {

/*! \brief Optional requantisation applied to each output tile before STORE. */
struct RequantOptions {
  std::optional<int> shift;  // ALU SHR by an immediate
  std::optional<int> clip;   // ALU CLIP to [0, clip]
};

/*! \brief One unit of conv work: a (context, outer tile) pair. */
struct ConvStage {
  int ctx = 0;
  int tb = 0;
  int tco = 0;
  int th = 0;
  int tw = 0;
  int tci = 0;
  bool first = false;  // first input channel tile: reset accumulators
  bool last = false;   // last input channel tile: requantise and store
};

/*! \brief Which slot each stage reads and whether its chunk must be loaded. */
struct SlotAssignment {
  std::vector<int> inp_slot;
  std::vector<int> wgt_slot;
  std::vector<bool> load_inp;
  std::vector<bool> load_wgt;
};

/*! \brief Logical conv schedule kept with a generated stream. */
struct ConvPlan {
  ConvLayer layer;  // channel padded
  AccelConfig cfg;
  TilingParams params;
  RequantOptions requant;
  TileDims dims;
  InnerTile inner;
  int threads = 1;
  int hwin = 0;  // input rows per chunk
  int wwin = 0;  // input columns per chunk
  std::vector<ConvStage> stages;
  SlotAssignment assignment;

  std::int64_t inp_slot_entries() const;
  std::int64_t wgt_slot_entries() const;
  std::int64_t acc_slot_entries() const;
  /*! \brief Chunk identities; equal keys load identical DRAM data. */
  std::int64_t inp_chunk(const ConvStage& s) const;
  std::int64_t wgt_chunk(const ConvStage& s) const;
};

/*!
 * \brief Tiled conv (or dense) lowering. The layer is channel padded
 *  internally. Throws CodegenError when the tiling does not fit the
 *  scratchpads or a field overflows, TilingError on illegal params.
 */
InstructionStream gen_conv_stream(const ConvLayer& layer, const AccelConfig& cfg,
                                  const TilingParams& params, const RequantOptions& requant = {});
InstructionStream gen_conv_stream(const ConvLayer& layer, const AccelConfig& cfg,
                                  const TpsResult& tiling, const RequantOptions& requant = {});

/*!
 * \brief Search the tiling and lower the best candidate whose real
 *  scratchpad footprint fits; candidates are tried in ranking order.
 */
InstructionStream compile_conv(const ConvLayer& layer, const AccelConfig& cfg,
                               const RequantOptions& requant = {},
                               const SearchOptions& search_options = {},
                               TpsResult* chosen = nullptr);

/*! \brief Depthwise, max pool and average pool layers on the ALU. */
InstructionStream gen_alu_layer_stream(const ConvLayer& layer, const AccelConfig& cfg,
                                       const RequantOptions& requant = {});

/*! \brief Dispatch on layer kind: ALU layers directly, others through compile_conv. */
InstructionStream compile_layer(const ConvLayer& layer, const AccelConfig& cfg,
                                const RequantOptions& requant = {});

/*!
 * \brief Reuse chunks already resident in either scratchpad half instead of
 *  reloading them. Streams without a plan, or without duplicates, are
 *  returned unchanged.
 */
InstructionStream eliminate_redundant_loads(const InstructionStream& stream);

/*! \brief Number of chunk loads the plan issues under an assignment. */
std::int64_t count_chunk_loads(const SlotAssignment& a);

struct DramBytes {
  std::array<std::int64_t, 6> by_kind{};  // indexed by MemKind
  std::int64_t read() const;
  std::int64_t written() const { return by_kind[static_cast<int>(MemKind::kOut)]; }
  std::int64_t total() const { return read() + written(); }
  std::int64_t operator[](MemKind k) const { return by_kind[static_cast<int>(k)]; }
  friend bool operator==(const DramBytes&, const DramBytes&) = default;
};

/*! \brief Bytes moved by LOAD/STORE instructions; pad entries move nothing. */
DramBytes static_dram_bytes(const InstructionStream& stream, const AccelConfig& cfg);

struct TokenDiagnosis {
  bool ok = true;
  bool deadlock = false;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  std::vector<std::size_t> blocked;  // instruction indices stuck in the abstract run

  std::string message() const;
};

/*! \brief Static token balance plus an untimed execution of the stream. Never throws. */
TokenDiagnosis validate_tokens(const InstructionStream& stream);

/*! \brief Dense NCHW (or OIHW) int32 tensor. */
struct Tensor4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<std::int32_t> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0) {}

  std::int32_t& at(int i, int j, int y, int x) {
    return data[((static_cast<std::size_t>(i) * c + j) * h + y) * w + x];
  }
  std::int32_t at(int i, int j, int y, int x) const {
    return data[((static_cast<std::size_t>(i) * c + j) * h + y) * w + x];
  }
  friend bool operator==(const Tensor4&, const Tensor4&) = default;
};

/*! \brief Per-kind DRAM contents, element granular, tiles back to back. */
struct DramImage {
  std::vector<std::int32_t> inp;
  std::vector<std::int32_t> wgt;
  std::vector<std::int32_t> acc;
  std::vector<std::int32_t> out;
};

/*!
 * \brief DRAM image for a conv/dense layer. input is (b, fi, h, w), weights
 *  (fo, fi, kh, kw); padded channels are zero.
 */
DramImage pack_conv(const ConvLayer& layer, const AccelConfig& cfg, const Tensor4& input,
                    const Tensor4& weights);

/*!
 * \brief DRAM image for an ALU layer. weights is (fo, 1, kh, kw) for depthwise
 *  and ignored for pooling.
 */
DramImage pack_alu_layer(const ConvLayer& layer, const AccelConfig& cfg, const Tensor4& input,
                         const Tensor4& weights = {});

/*! \brief Read the (b, fo, oh, ow) result back from the OUT region. */
Tensor4 unpack_output(const ConvLayer& layer, const AccelConfig& cfg, const DramImage& dram);

/*!
 * \brief GEMM stream with n_gemm instructions of iters x iters loops over a
 *  single uop, after one INP and one WGT load. Compute dominated for large iters.
 */
InstructionStream gen_synthetic_gemm(const AccelConfig& cfg, int n_gemm, int iters);

/*! \brief ALU immediate stream (ADD imm) with the same shape as gen_synthetic_gemm. */
InstructionStream gen_synthetic_alu(const AccelConfig& cfg, int n_alu, int iters);

}  // namespace accel

#endif  // ACCEL_CODEGEN_HPP_
