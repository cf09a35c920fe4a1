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
 * \file tps.hpp
 * \brief Tiling parameter search for convolution layers.
 *
 * Five loop dimensions (batch tiles, output rows, output columns, output
 * channel blocks, input channel blocks) are split into outer x inner pairs and
 * combined with one of three virtual thread settings. Every candidate is
 * scored by its DRAM byte traffic and kept only if the three scratchpad
 * usages fit their capacities.
 */
#ifndef ACCEL_TPS_HPP_
#define ACCEL_TPS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "accel/config.hpp"
#include "accel/workload.hpp"

namespace accel {

struct TilingParams {
  int tb_o = 1;
  int th_o = 1;
  int tw_o = 1;
  int tco_o = 1;
  int tci_o = 1;
  int oc_n = 1;
  int h_n = 1;

  friend bool operator==(const TilingParams&, const TilingParams&) = default;

  auto key() const { return std::make_tuple(tb_o, th_o, tw_o, tco_o, tci_o, oc_n, h_n); }
  std::string to_string() const;
};

/*! \brief Dimension sizes the tiling factors must divide. */
struct TileDims {
  int nb = 1;   // b / batch
  int oh = 1;
  int ow = 1;
  int do_ = 1;  // fo / block_out
  int di = 1;   // fi / block_in
};

/*! \brief Inner extents implied by a tiling. */
struct InnerTile {
  int tb_i = 1;
  int th_i = 1;
  int tw_i = 1;
  int tco_i = 1;
  int tci_i = 1;
};

struct TpsResult {
  TilingParams params;
  std::int64_t s_inp = 0;
  std::int64_t s_wgt = 0;
  std::int64_t s_acc = 0;
  std::int64_t l_inp = 0;
  std::int64_t l_wgt = 0;
  std::int64_t l_acc = 0;
  std::int64_t u_inp = 0;
  std::int64_t u_wgt = 0;
  std::int64_t u_acc = 0;
  bool feasible = false;
  std::int64_t total_cost = 0;
};

/*!
 * \brief Throws TilingError unless the layer is channel padded and its batch
 *  is a multiple of the machine batch.
 */
TileDims tile_dims(const ConvLayer& layer, const AccelConfig& cfg);

InnerTile inner_tile(const TileDims& dims, const TilingParams& params);

/*!
 * \brief Empty when params are legal for the layer, otherwise the reason they
 *  are rejected.
 */
std::optional<std::string> check_params(const ConvLayer& layer, const AccelConfig& cfg,
                                        const TilingParams& params);

/*! \brief {s_inp, s_wgt, s_acc} in bytes. Throws TilingError on illegal params. */
std::array<std::int64_t, 3> scratchpad_usage(const ConvLayer& layer, const AccelConfig& cfg,
                                             const TilingParams& params);

/*! \brief {l_inp, l_wgt, l_acc} in bytes. Throws TilingError on illegal params. */
std::array<std::int64_t, 3> dram_cost(const ConvLayer& layer, const AccelConfig& cfg,
                                      const TilingParams& params);

/*! \brief Full score of one candidate. Throws TilingError on illegal params. */
TpsResult evaluate(const ConvLayer& layer, const AccelConfig& cfg, const TilingParams& params);

struct Candidate {
  TilingParams params;
  std::optional<std::string> rejected;  // set when params are illegal
  TpsResult result;                     // meaningful only when !rejected
};

/*!
 * \brief Every (outer factor, thread) combination in enumeration order,
 *  including illegal ones, which carry their rejection reason.
 */
std::vector<Candidate> enumerate_candidates(const ConvLayer& layer, const AccelConfig& cfg);

struct SearchOptions {
  /*! \brief Restrict the thread setting; unset means any of the three. */
  std::optional<int> oc_n;
  std::optional<int> h_n;
  /*! \brief Keep all feasible results, best first. */
  bool keep_ranking = false;
};

struct SearchOutcome {
  TpsResult best;
  std::vector<TpsResult> ranking;
  std::int64_t candidates = 0;
  std::int64_t legal = 0;
  std::int64_t feasible = 0;
};

/*! \brief Strict ordering used to pick the optimum: cost, then s_acc, then params. */
bool better(const TpsResult& a, const TpsResult& b);

/*!
 * \brief Exhaustive minimisation of total DRAM bytes. Throws TilingError
 *  "no feasible tiling" naming the tightest scratchpad when nothing fits.
 */
SearchOutcome search(const ConvLayer& layer, const AccelConfig& cfg,
                     const SearchOptions& options = {});

/*!
 * \brief Largest legal outer factor in every dimension with single threads,
 *  i.e. the smallest scratchpad footprint.
 */
TpsResult fallback_schedule(const ConvLayer& layer, const AccelConfig& cfg);

/*! \brief CSV with a header row; top_k <= 0 keeps every row. */
std::string ranking_csv(const std::vector<TpsResult>& results, int top_k = 0);

std::string result_json(const TpsResult& result);

}  // namespace accel

#endif  // ACCEL_TPS_HPP_
