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
 * \file workload.hpp
 * \brief Layer shapes and the quantities derived from them.
 */
#ifndef ACCEL_WORKLOAD_HPP_
#define ACCEL_WORKLOAD_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "accel/config.hpp"

namespace accel {

enum class LayerKind : std::uint8_t { kConv, kDepthwise, kDense, kMaxPool, kAvgPool };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/*!
 * \brief One convolution-like layer. Pooling layers carry fi == fo and no weights.
 */
struct ConvLayer {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  int b = 1;
  int h = 1;
  int w = 1;
  int kh = 1;
  int kw = 1;
  int fi = 1;
  int fo = 1;
  int ph = 0;
  int pw = 0;
  int sh = 1;
  int sw = 1;

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;

  /*! \brief Throws WorkloadError on a shape that violates the layer invariants. */
  void validate() const;

  bool uses_alu() const {
    return kind == LayerKind::kDepthwise || kind == LayerKind::kMaxPool ||
           kind == LayerKind::kAvgPool;
  }
};

struct OutputDims {
  int oh = 0;
  int ow = 0;
  friend bool operator==(const OutputDims&, const OutputDims&) = default;
};

OutputDims output_dims(const ConvLayer& layer);

/*!
 * \brief Multiply-accumulate count. Pooling layers count one reduction op per
 *  kernel tap, the same shape as depthwise.
 */
std::int64_t mac_count(const ConvLayer& layer);

/*!
 * \brief Round channel counts up to lane multiples. GEMM layers pad fi to
 *  block_in and fo to block_out; ALU layers pad both to block_out since they
 *  run on accumulator tiles.
 */
ConvLayer pad_channels(const ConvLayer& layer, const AccelConfig& cfg);

std::vector<ConvLayer> load_workload(std::string_view json_text);
std::vector<ConvLayer> load_workload_file(const std::string& path);
std::string serialize_workload(const std::vector<ConvLayer>& layers);

std::string layer_to_json(const ConvLayer& layer);
ConvLayer layer_from_json(std::string_view json_text);

}  // namespace accel

#endif  // ACCEL_WORKLOAD_HPP_
