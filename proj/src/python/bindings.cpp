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
 * \file bindings.cpp
 * \brief accel_lab._core: JSON-in, JSON-out entry points.
 */
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <tuple>
#include <vector>

#include "accel/analysis.hpp"
#include "accel/codegen.hpp"
#include "accel/common.hpp"
#include "accel/config.hpp"
#include "accel/engine.hpp"
#include "accel/floorplan.hpp"
#include "accel/tps.hpp"
#include "accel/workload.hpp"

namespace py = pybind11;

namespace accel {
namespace {

ConvLayer padded(const std::string& layer_json, const AccelConfig& cfg) {
  return pad_channels(layer_from_json(layer_json), cfg);
}

std::string compile(const std::string& layer_json, const std::string& config_json, bool eliminate) {
  const AccelConfig cfg = load_config(config_json);
  InstructionStream s = compile_layer(layer_from_json(layer_json), cfg);
  if (eliminate) s = eliminate_redundant_loads(s);
  return stream_to_jsonl(s);
}

std::string simulate(const std::string& stream_jsonl, const std::string& config_json, std::uint64_t seed,
                     std::int64_t max_cycles) {
  SimOptions o;
  o.seed = seed;
  o.max_cycles = max_cycles;
  return report_json(run(stream_from_jsonl(stream_jsonl), load_config(config_json), o));
}

std::vector<std::tuple<std::string, std::string, std::string, std::string>> check_floorplan(
    const std::string& floorplan_json, const std::string& tech_json, double min_spacing_um) {
  const FpNode root = load_floorplan(floorplan_json, load_tech(tech_json));
  std::vector<std::tuple<std::string, std::string, std::string, std::string>> out;
  for (const Violation& v : check(root, min_spacing_um)) {
    out.emplace_back(std::string(to_string(v.kind)), v.a, v.b, v.message);
  }
  return out;
}

}  // namespace
}  // namespace accel

PYBIND11_MODULE(_core, m) {
  using namespace accel;
  m.doc() = "Transaction-level tensor accelerator model";

  py::register_exception<Error>(m, "AccelError", PyExc_ValueError);

  m.def("default_config", [] { return serialize_config(AccelConfig{}); });
  m.def("normalize_config", [](const std::string& text) { return serialize_config(load_config(text)); },
        py::arg("config_json"));
  m.def("normalize_workload",
        [](const std::string& text) { return serialize_workload(load_workload(text)); },
        py::arg("workload_json"));
  m.def(
      "search",
      [](const std::string& layer, const std::string& config) {
        const AccelConfig cfg = load_config(config);
        return result_json(search(padded(layer, cfg), cfg).best);
      },
      py::arg("layer_json"), py::arg("config_json"));
  m.def(
      "fallback",
      [](const std::string& layer, const std::string& config) {
        const AccelConfig cfg = load_config(config);
        return result_json(fallback_schedule(padded(layer, cfg), cfg));
      },
      py::arg("layer_json"), py::arg("config_json"));
  m.def("compile_layer", &compile, py::arg("layer_json"), py::arg("config_json"),
        py::arg("eliminate") = true);
  m.def(
      "static_dram_bytes",
      [](const std::string& stream, const std::string& config) {
        return static_dram_bytes(stream_from_jsonl(stream), load_config(config)).total();
      },
      py::arg("stream_jsonl"), py::arg("config_json"));
  m.def("simulate", &simulate, py::arg("stream_jsonl"), py::arg("config_json"), py::arg("seed") = 0,
        py::arg("max_cycles") = 0);
  m.def("bandwidth_roof", &bandwidth_roof, py::arg("ops_per_byte"), py::arg("bus_bits"));
  m.def(
      "pipe_stages",
      [](std::pair<double, double> a, std::pair<double, double> b, double reach) {
        return pipe_stages({a.first, a.second}, {b.first, b.second}, reach);
      },
      py::arg("a"), py::arg("b"), py::arg("reach_um_per_cycle"));
  m.def("check_floorplan", &check_floorplan, py::arg("floorplan_json"), py::arg("tech_json"),
        py::arg("min_spacing_um") = 0.0);
}
