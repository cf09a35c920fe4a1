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
 * \file analysis.hpp
 * \brief Roofline, utilization and design-space reports built from SimReports.
 *
 * Every chart is produced as CSV first; the SVG is rendered from that CSV
 * text, so both always carry the same data.
 */
#ifndef ACCEL_ANALYSIS_HPP_
#define ACCEL_ANALYSIS_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "accel/codegen.hpp"
#include "accel/config.hpp"
#include "accel/engine.hpp"
#include "accel/workload.hpp"

namespace accel {

struct RooflinePoint {
  double ops_per_byte = 0;
  double ops_per_cycle = 0;
  std::string label;
  int bus_bits = 0;
  std::int64_t peak_ops_per_cycle = 0;
};

/*! \brief MACs performed by the non-reset GEMM instructions of a stream. */
std::int64_t stream_macs(const InstructionStream& stream, const AccelConfig& cfg);

/*! \brief Ops are 2 per MAC. Throws Error on zero bytes or cycles. */
RooflinePoint roofline_point(const SimReport& report, std::int64_t macs, const AccelConfig& cfg,
                             const std::string& label = "");
RooflinePoint roofline_point(const SimReport& report, const ConvLayer& layer,
                             const AccelConfig& cfg, const std::string& label = "");

/*! \brief Memory roof: ops/cycle reachable at a given intensity. */
inline double bandwidth_roof(double ops_per_byte, int bus_bits) {
  return ops_per_byte * bus_bits / 8.0;
}

struct Chart {
  std::string csv;
  std::string svg;
};

/*! \brief kind,label,ops_per_byte,ops_per_cycle,bus_bits,peak_ops_per_cycle rows. */
std::string roofline_csv(const std::vector<RooflinePoint>& points,
                         const std::vector<AccelConfig>& cfgs);
std::string roofline_svg(const std::string& csv);
Chart roofline_chart(const std::vector<RooflinePoint>& points, const std::vector<AccelConfig>& cfgs);

struct ProcessUtilization {
  std::int64_t active = 0;
  std::int64_t idle = 0;
  std::int64_t blocked = 0;
  std::int64_t total = 0;
  /*! \brief Share of cycles not spent on an instruction. */
  double idle_fraction() const {
    return total > 0 ? 1.0 - static_cast<double>(active) / static_cast<double>(total) : 0.0;
  }
};

/*! \brief Per process (load, compute, store) cycle breakdown. */
std::array<ProcessUtilization, 3> utilization(const SimReport& report);

/*! \brief CSV is intervals_csv(report); the SVG draws one bar per process. */
std::string utilization_svg(const std::string& csv);
Chart utilization_timeline(const SimReport& report);

struct AreaCoeffs {
  double alpha = 1.0;   // per MAC lane
  double beta = 0.05;   // per scratchpad bit
};

std::int64_t scratchpad_bits(const AccelConfig& cfg);

/*! \brief Linear area proxy; not a physical area. Throws Error on negative coefficients. */
double area_proxy(const AccelConfig& cfg, const AreaCoeffs& coeffs = {});

struct DesignPoint {
  AccelConfig cfg;
  std::int64_t total_cycles = 0;
  double area = 0;
  std::string label;
};

/*!
 * \brief label,batch,block_in,block_out,macs,bus_bits,scratchpad_bits,area_proxy,total_cycles
 *  rows sorted by area (ties keep input order).
 */
std::string design_space_table(const std::vector<DesignPoint>& entries);

/*! \brief Per-layer results of compiling and simulating a workload. */
struct LayerRun {
  ConvLayer layer;
  InstructionStream stream;
  SimReport report;
  std::int64_t macs = 0;
  std::int64_t cycles = 0;
  std::int64_t dram_bytes = 0;
};

struct WorkloadRun {
  std::vector<LayerRun> layers;
  std::int64_t total_cycles = 0;
  std::int64_t dram_bytes = 0;
  std::int64_t macs = 0;
  bool completed = true;
};

/*!
 * \brief Compile every layer (ALU layers directly, others through the tiling
 *  search) and run it in timing mode. Reports are dropped unless keep_reports.
 */
WorkloadRun simulate_workload(const std::vector<ConvLayer>& layers, const AccelConfig& cfg,
                              const SimOptions& options = {}, bool eliminate = true,
                              bool keep_reports = false);

}  // namespace accel

#endif  // ACCEL_ANALYSIS_HPP_
