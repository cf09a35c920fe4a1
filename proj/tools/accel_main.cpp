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
 * \file accel_main.cpp
 * \brief The accel command line tool.
 */
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "accel/analysis.hpp"
#include "accel/codegen.hpp"
#include "accel/config.hpp"
#include "accel/engine.hpp"
#include "accel/floorplan.hpp"
#include "accel/tps.hpp"
#include "accel/workload.hpp"

namespace fs = std::filesystem;
using namespace accel;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

/*! \brief Bad combination of otherwise well-formed flags. */
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const char* kConfigHelp = R"(
CONFIG FILE (--config): JSON object of integer fields; missing fields keep defaults.
  batch block_in block_out inp_elem_bits wgt_elem_bits acc_elem_bits out_elem_bits
  uop_bits ins_bits c_inp c_wgt c_acc c_uop (bytes) axi_data_bits dram_latency_cycles
  vme_max_inflight gemm_ii alu_ii_imm alu_ii_two gemm_pipeline_depth loop_extent_bits
  memop_size_bits memop_stride_bits dram_addr_bits pad_bits alu_imm_bits
WORKLOAD FILE (--workload): JSON array of layers
  {"name","kind":conv|depthwise|dense|maxpool|avgpool,"b","h","w","kh","kw","fi","fo",
   "ph","pw","sh","sw"}
)";

const char* kTpsHelp = R"(
OUTPUT <layer>.tps.csv:
  rank,tb_o,th_o,tw_o,tco_o,tci_o,oc_n,h_n,s_inp,s_wgt,s_acc,l_inp,l_wgt,l_acc,
  u_inp,u_wgt,u_acc,feasible,total_cost   (feasible rows, best first)
)";

const char* kGenHelp = R"(
OUTPUT <layer>.jsonl: header line {"format":"accel-stream","version":1,
  "instructions":N,"uops":[[dst,src,wgt],...]} then one instruction object per line.
OUTPUT <layer>.bin: instructions as 16-byte little-endian words, then uops.
)";

const char* kSimHelp = R"(
OUTPUT <name>.report.json: completed, total_cycles, dram_bytes{INP,WGT,ACC,UOP,OUT,read,
  written}, token_high_water{queue:count}, deadlock, blocked, gemm_cycles, alu_cycles,
  vme{requests,max_inflight,read_pulses,write_pulses,max_uops_per_pulse}, intervals[].
OUTPUT <name>.intervals.csv: cycle_start,cycle_end,process,kind
  process is load|compute|store, kind is IDLE|BLOCKED|LOAD|STORE|GEMM|ALU.
Exit status 1 on deadlock; the diagnosis is printed on stderr.
)";

const char* kRooflineHelp = R"(
OUTPUT roofline.csv: kind,label,ops_per_byte,ops_per_cycle,bus_bits,peak_ops_per_cycle
  kind is compute_roof, bandwidth_roof or point. OUTPUT roofline.svg (log-log).
)";

const char* kUtilHelp = R"(
OUTPUT <layer>.util.csv: cycle_start,cycle_end,process,kind (as in sim).
OUTPUT <layer>.util.svg: one bar per process, GEMM red, ALU green.
)";

const char* kSpaceHelp = R"(
GRID FILE (--grid): {"base": {config fields}, "axes": {"log_block": [..],
  "axi_data_bits": [..], "scratch_scale": [..]}}. log_block sets block_in and
  block_out to 2^v; scratch_scale multiplies c_inp, c_wgt and c_acc. Missing axes
  keep the base value. One row per grid point.
OUTPUT design_space.csv:
  label,batch,block_in,block_out,macs,bus_bits,scratchpad_bits,area_proxy,total_cycles
  sorted by area_proxy. The area proxy is alpha*MACs + beta*scratchpad bits.
)";

const char* kFpHelp = R"(
TECH FILE (--tech): {"<macro>": {"width": um, "height": um}, ...}
FLOORPLAN FILE (--floorplan): node tree. Every node has "name" and "kind"
  (hierarchy|macro|array) and optional "orientation" (R0 R90 R180 R270 MX MY MX90 MY90).
  hierarchy: "children" [..], optional "bound" [x0,y0,x1,y1] (um)
  macro: "macro" naming a tech entry
  array: "rows","cols","pitch_x","pitch_y","pattern" ({r},{c},{i}),"proto" node
  children carry "x","y" (um): lower-left corner of the oriented box.
OUTPUT violations.csv: kind,a,b,message   kind is overlap|spacing|duplicate_name|out_of_bounds
)";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << text;
}

fs::path out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw UsageError("cannot create output directory '" + dir + "'");
  return p;
}

AccelConfig config_or_default(const std::string& path) {
  return path.empty() ? AccelConfig{} : load_config_file(path);
}

std::vector<ConvLayer> select_layers(const std::string& workload,
                                     const std::vector<std::string>& names) {
  std::vector<ConvLayer> all = load_workload_file(workload);
  if (names.empty()) return all;
  std::vector<ConvLayer> picked;
  for (const auto& n : names) {
    auto it = std::find_if(all.begin(), all.end(), [&](const ConvLayer& l) { return l.name == n; });
    if (it == all.end()) throw UsageError("no layer named '" + n + "' in " + workload);
    picked.push_back(*it);
  }
  return picked;
}

ConvLayer single_layer(const std::string& workload, const std::string& name) {
  auto layers = select_layers(workload, name.empty() ? std::vector<std::string>{}
                                                     : std::vector<std::string>{name});
  if (layers.size() != 1) throw UsageError("workload has several layers; pick one with --layer");
  return layers.front();
}

std::string file_stem(const ConvLayer& l, std::size_t index) {
  return l.name.empty() ? "layer" + std::to_string(index) : l.name;
}

RequantOptions requant(const std::optional<int>& shift, const std::optional<int>& clip) {
  RequantOptions rq;
  rq.shift = shift;
  rq.clip = clip;
  return rq;
}

/*! \brief Random int8 data for one layer, packed into a DRAM image. */
DramImage random_image(const ConvLayer& layer, const AccelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(-128, 127);
  auto fill = [&](int n, int c, int h, int w) {
    Tensor4 t(n, c, h, w);
    for (auto& v : t.data) v = d(rng);
    return t;
  };
  Tensor4 x = fill(layer.b, layer.fi, layer.h, layer.w);
  if (layer.uses_alu()) {
    Tensor4 w = layer.kind == LayerKind::kDepthwise ? fill(layer.fo, 1, layer.kh, layer.kw) : Tensor4{};
    return pack_alu_layer(layer, cfg, x, w);
  }
  return pack_conv(layer, cfg, x, fill(layer.fo, layer.fi, layer.kh, layer.kw));
}

/*! \brief Zero DRAM large enough for every tile a stream touches. */
DramImage zero_image(const InstructionStream& s, const AccelConfig& cfg) {
  std::int64_t tiles[5] = {0, 0, 0, 0, 0};
  for (const auto& in : s.insns) {
    if (in.opcode != Opcode::kLoad && in.opcode != Opcode::kStore) continue;
    if (in.mem_kind == MemKind::kUop || in.y_size == 0 || in.x_size == 0) continue;
    const std::int64_t last =
        static_cast<std::int64_t>(in.dram_base) +
        static_cast<std::int64_t>(in.y_size - 1) * in.x_stride + in.x_size;
    auto& t = tiles[static_cast<int>(in.mem_kind)];
    t = std::max(t, last);
  }
  auto elems = [&](MemKind k) {
    const int b = cfg.batch, bi = cfg.block_in, bo = cfg.block_out;
    switch (k) {
      case MemKind::kInp: return std::int64_t{b} * bi;
      case MemKind::kWgt: return std::int64_t{bo} * bi;
      default: return std::int64_t{b} * bo;
    }
  };
  DramImage img;
  img.inp.assign(tiles[0] * elems(MemKind::kInp), 0);
  img.wgt.assign(tiles[1] * elems(MemKind::kWgt), 0);
  img.acc.assign(tiles[2] * elems(MemKind::kAcc), 0);
  img.out.assign(tiles[4] * elems(MemKind::kOut), 0);
  return img;
}

InstructionStream build_stream(const ConvLayer& layer, const AccelConfig& cfg,
                               const RequantOptions& rq, bool eliminate) {
  InstructionStream s = compile_layer(layer, cfg, rq);
  return eliminate ? eliminate_redundant_loads(s) : s;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << v;
  return os.str();
}

// ---------------------------------------------------------------------------

struct TpsArgs {
  std::string config, workload, out = ".";
  std::vector<std::string> layers;
  int top = 0;
};

int cmd_tps(const TpsArgs& a) {
  const AccelConfig cfg = config_or_default(a.config);
  const fs::path dir = out_dir(a.out);
  auto layers = select_layers(a.workload, a.layers);
  std::cout << "layer,best_params,tps_bytes,fallback_bytes,ratio\n";
  int idx = 0;
  for (const auto& layer : layers) {
    const std::size_t i = idx++;
    if (layer.uses_alu()) {
      std::cout << file_stem(layer, i) << ",alu layer; no tiling search,,,\n";
      continue;
    }
    const ConvLayer L = pad_channels(layer, cfg);
    SearchOptions so;
    so.keep_ranking = true;
    SearchOutcome out = search(L, cfg, so);
    write_file(dir / (file_stem(layer, i) + ".tps.csv"), ranking_csv(out.ranking, a.top));
    if (!out.best.feasible) {
      std::cerr << "error: layer " << file_stem(layer, i) << ": no feasible tiling ("
                << out.legal << " legal candidates)\n";
      return kExitDomain;
    }
    const TpsResult fb = fallback_schedule(L, cfg);
    std::cout << file_stem(layer, i) << "," << out.best.params.to_string() << ","
              << out.best.total_cost << "," << fb.total_cost << ","
              << fmt(static_cast<double>(fb.total_cost) / out.best.total_cost) << "\n";
  }
  return kExitOk;
}

struct GenArgs {
  std::string config, workload, layer, out = ".";
  bool no_eliminate = false;
  std::optional<int> shift, clip;
};

int cmd_gen(const GenArgs& a) {
  const AccelConfig cfg = config_or_default(a.config);
  const fs::path dir = out_dir(a.out);
  const ConvLayer layer = single_layer(a.workload, a.layer);
  InstructionStream s = build_stream(layer, cfg, requant(a.shift, a.clip), !a.no_eliminate);
  const std::string stem = file_stem(layer, 0);
  write_file(dir / (stem + ".jsonl"), stream_to_jsonl(s));
  write_file(dir / (stem + ".bin"), encode_stream(s, cfg));
  const auto bytes = static_dram_bytes(s, cfg);
  std::cout << stem << ": " << s.insns.size() << " instructions, " << s.uops.size()
            << " uops, " << bytes.read() << " DRAM bytes read, " << bytes.written()
            << " written\n";
  return kExitOk;
}

struct SimArgs {
  std::string config, workload, stream, out = ".", mode = "timing";
  std::vector<std::string> layers;
  std::uint64_t seed = 0;
  std::int64_t max_cycles = 0;
  bool no_eliminate = false;
  std::optional<int> shift, clip;
};

int report_sim(const std::string& stem, const SimReport& r, const fs::path& dir) {
  write_file(dir / (stem + ".report.json"), report_json(r));
  write_file(dir / (stem + ".intervals.csv"), intervals_csv(r));
  if (!r.completed) {
    std::cerr << "error: " << stem << ": " << r.deadlock.value_or("did not complete") << "\n";
    return kExitDomain;
  }
  std::cout << stem << ": " << r.total_cycles << " cycles, " << r.dram_bytes.read()
            << " DRAM bytes read, " << r.dram_bytes.written() << " written, gemm "
            << r.gemm_cycles << ", alu " << r.alu_cycles << "\n";
  return kExitOk;
}

int cmd_sim(const SimArgs& a) {
  const AccelConfig cfg = config_or_default(a.config);
  const fs::path dir = out_dir(a.out);
  SimOptions opt;
  opt.mode = a.mode == "functional" ? SimMode::kFunctional : SimMode::kTiming;
  opt.seed = a.seed;
  opt.max_cycles = a.max_cycles;

  if (!a.stream.empty()) {
    if (!a.workload.empty()) throw UsageError("--stream and --workload are exclusive");
    const InstructionStream s = stream_from_jsonl(read_file(a.stream));
    DramImage img = opt.mode == SimMode::kFunctional ? zero_image(s, cfg) : DramImage{};
    return report_sim(fs::path(a.stream).stem().string(), run(s, cfg, opt, std::move(img)), dir);
  }
  if (a.workload.empty()) throw UsageError("sim needs --workload or --stream");
  int status = kExitOk;
  int idx = 0;
  for (const auto& layer : select_layers(a.workload, a.layers)) {
    const std::string stem = file_stem(layer, idx++);
    const InstructionStream s = build_stream(layer, cfg, requant(a.shift, a.clip), !a.no_eliminate);
    DramImage img = opt.mode == SimMode::kFunctional ? random_image(layer, cfg, a.seed) : DramImage{};
    const int rc = report_sim(stem, run(s, cfg, opt, std::move(img)), dir);
    if (rc != kExitOk) status = rc;
  }
  return status;
}

struct RooflineArgs {
  std::vector<std::string> configs;
  std::string workload, out = ".";
  std::vector<std::string> layers;
  std::uint64_t seed = 0;
};

int cmd_roofline(const RooflineArgs& a) {
  const fs::path dir = out_dir(a.out);
  std::vector<AccelConfig> cfgs;
  std::vector<std::string> names;
  if (a.configs.empty()) {
    cfgs.emplace_back();
    names.push_back("default");
  }
  for (const auto& c : a.configs) {
    cfgs.push_back(load_config_file(c));
    names.push_back(fs::path(c).stem().string());
  }
  const auto layers = select_layers(a.workload, a.layers);
  SimOptions opt;
  opt.seed = a.seed;
  std::vector<RooflinePoint> points;
  for (std::size_t c = 0; c < cfgs.size(); ++c) {
    int idx = 0;
    for (const auto& layer : layers) {
      const std::string label = names[c] + ":" + file_stem(layer, idx++);
      const SimReport r = run(build_stream(layer, cfgs[c], {}, true), cfgs[c], opt);
      if (!r.completed) {
        std::cerr << "error: " << label << ": " << r.deadlock.value_or("did not complete") << "\n";
        return kExitDomain;
      }
      points.push_back(roofline_point(r, layer, cfgs[c], label));
    }
  }
  const Chart chart = roofline_chart(points, cfgs);
  write_file(dir / "roofline.csv", chart.csv);
  write_file(dir / "roofline.svg", chart.svg);
  std::cout << "label,ops_per_byte,ops_per_cycle\n";
  for (const auto& p : points)
    std::cout << p.label << "," << fmt(p.ops_per_byte) << "," << fmt(p.ops_per_cycle) << "\n";
  return kExitOk;
}

struct UtilArgs {
  std::string config, workload, layer, out = ".";
  std::uint64_t seed = 0;
};

int cmd_util(const UtilArgs& a) {
  const AccelConfig cfg = config_or_default(a.config);
  const fs::path dir = out_dir(a.out);
  const ConvLayer layer = single_layer(a.workload, a.layer);
  SimOptions opt;
  opt.seed = a.seed;
  const SimReport r = run(build_stream(layer, cfg, {}, true), cfg, opt);
  if (!r.completed) {
    std::cerr << "error: " << r.deadlock.value_or("did not complete") << "\n";
    return kExitDomain;
  }
  const std::string stem = file_stem(layer, 0);
  const Chart chart = utilization_timeline(r);
  write_file(dir / (stem + ".util.csv"), chart.csv);
  write_file(dir / (stem + ".util.svg"), chart.svg);
  const auto u = utilization(r);
  const char* names[] = {"load", "compute", "store"};
  std::cout << "process,active,blocked,idle,total,idle_fraction\n";
  for (int p = 0; p < 3; ++p) {
    std::cout << names[p] << "," << u[p].active << "," << u[p].blocked << "," << u[p].idle << ","
              << u[p].total << "," << fmt(u[p].idle_fraction()) << "\n";
  }
  return kExitOk;
}

struct SpaceArgs {
  std::string grid, workload, out = ".";
  std::vector<std::string> layers;
  std::uint64_t seed = 0;
  double alpha = AreaCoeffs{}.alpha, beta = AreaCoeffs{}.beta;
};

int cmd_space(const SpaceArgs& a) {
  const fs::path dir = out_dir(a.out);
  nlohmann::json grid;
  try {
    grid = nlohmann::json::parse(read_file(a.grid));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("grid parse error: ") + e.what());
  }
  if (!grid.is_object()) throw ConfigError("grid must be an object");
  for (const auto& [k, v] : grid.items()) {
    if (k != "base" && k != "axes") throw ConfigError("unknown grid key '" + k + "'");
  }
  const nlohmann::json base = grid.value("base", nlohmann::json::object());
  const nlohmann::json axes = grid.value("axes", nlohmann::json::object());
  for (const auto& [k, v] : axes.items()) {
    if (k != "log_block" && k != "axi_data_bits" && k != "scratch_scale")
      throw ConfigError("unknown grid axis '" + k + "'");
    if (!v.is_array() || v.empty()) throw ConfigError("grid axis '" + k + "' must be a non-empty array");
  }
  const AccelConfig base_cfg = load_config(base.dump());
  auto axis = [&](const char* k, std::int64_t dflt) {
    std::vector<std::int64_t> v;
    if (!axes.contains(k)) return std::vector<std::int64_t>{dflt};
    for (const auto& x : axes.at(k)) {
      if (!x.is_number_integer()) throw ConfigError(std::string("grid axis '") + k + "' needs integers");
      v.push_back(x.get<std::int64_t>());
    }
    return v;
  };
  const auto blocks = axis("log_block", -1);
  const auto buses = axis("axi_data_bits", base_cfg.axi_data_bits);
  const auto scales = axis("scratch_scale", 1);

  const auto layers = select_layers(a.workload, a.layers);
  SimOptions opt;
  opt.seed = a.seed;
  AreaCoeffs coeffs;
  coeffs.alpha = a.alpha;
  coeffs.beta = a.beta;
  std::vector<DesignPoint> points;
  for (auto lb : blocks) {
    for (auto bus : buses) {
      for (auto sc : scales) {
        nlohmann::json j = base;
        if (lb >= 0) {
          if (lb > 12) throw ConfigError("log_block " + std::to_string(lb) + " out of range");
          j["block_in"] = j["block_out"] = std::int64_t{1} << lb;
        }
        j["axi_data_bits"] = bus;
        j["c_inp"] = base_cfg.c_inp * sc;
        j["c_wgt"] = base_cfg.c_wgt * sc;
        j["c_acc"] = base_cfg.c_acc * sc;
        DesignPoint p;
        p.cfg = load_config(j.dump());
        p.label = std::to_string(p.cfg.block_in) + "x" + std::to_string(p.cfg.block_out) + "_bus" +
                  std::to_string(bus) + "_s" + std::to_string(sc);
        const WorkloadRun w = simulate_workload(layers, p.cfg, opt);
        if (!w.completed) {
          std::cerr << "error: " << p.label << ": workload did not complete\n";
          return kExitDomain;
        }
        p.total_cycles = w.total_cycles;
        p.area = area_proxy(p.cfg, coeffs);
        points.push_back(std::move(p));
      }
    }
  }
  const std::string csv = design_space_table(points);
  write_file(dir / "design_space.csv", csv);
  std::cout << csv;
  return kExitOk;
}

struct FpArgs {
  std::string floorplan, tech, out;
  double min_spacing = 0;
  bool strict = false;
};

int cmd_fp_check(const FpArgs& a) {
  const FpNode root = load_floorplan(read_file(a.floorplan), load_tech(read_file(a.tech)));
  const auto v = check(root, a.min_spacing);
  const std::string csv = violations_csv(v);
  if (!a.out.empty()) write_file(out_dir(a.out) / "violations.csv", csv);
  std::cout << csv;
  std::cerr << v.size() << " violation(s)\n";
  return a.strict && !v.empty() ? kExitDomain : kExitOk;
}

int cmd_fp_render(const FpArgs& a) {
  const FpNode root = load_floorplan(read_file(a.floorplan), load_tech(read_file(a.tech)));
  const auto v = check(root, a.min_spacing);
  write_file(a.out, render_svg(root, v));
  std::cout << "wrote " << a.out << " (" << v.size() << " violation(s) highlighted)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"accel: tiling search, code generation and simulation for a load/compute/store "
               "accelerator, plus floorplan checks"};
  app.require_subcommand(1);
  app.footer(kConfigHelp);

  TpsArgs tps;
  auto* c_tps = app.add_subcommand("tps", "Rank tilings of conv/dense layers by DRAM traffic");
  c_tps->add_option("--config", tps.config, "Accelerator config JSON")->check(CLI::ExistingFile);
  c_tps->add_option("--workload", tps.workload, "Workload JSON")->required()->check(CLI::ExistingFile);
  c_tps->add_option("--layer", tps.layers, "Layer name (repeatable; default all)");
  c_tps->add_option("--top", tps.top, "Keep only the best N rows (0 = all)")->check(CLI::NonNegativeNumber);
  c_tps->add_option("--out-dir", tps.out, "Output directory");
  c_tps->footer(kTpsHelp);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Compile one layer into an instruction stream");
  c_gen->add_option("--config", gen.config, "Accelerator config JSON")->check(CLI::ExistingFile);
  c_gen->add_option("--workload", gen.workload, "Workload JSON")->required()->check(CLI::ExistingFile);
  c_gen->add_option("--layer", gen.layer, "Layer name (needed for multi-layer workloads)");
  c_gen->add_option("--out-dir", gen.out, "Output directory");
  c_gen->add_flag("--no-eliminate", gen.no_eliminate, "Keep redundant chunk loads");
  c_gen->add_option("--shift", gen.shift, "Right shift applied to results");
  c_gen->add_option("--clip", gen.clip, "Clip results to [0, N]");
  c_gen->footer(kGenHelp);

  SimArgs sim;
  auto* c_sim = app.add_subcommand("sim", "Simulate workload layers or a stream file");
  c_sim->add_option("--config", sim.config, "Accelerator config JSON")->check(CLI::ExistingFile);
  c_sim->add_option("--workload", sim.workload, "Workload JSON")->check(CLI::ExistingFile);
  c_sim->add_option("--layer", sim.layers, "Layer name (repeatable; default all)");
  c_sim->add_option("--stream", sim.stream, "Stream JSONL instead of a workload")->check(CLI::ExistingFile);
  c_sim->add_option("--mode", sim.mode, "timing or functional (random int8 data from --seed)")
      ->check(CLI::IsMember({"timing", "functional"}));
  c_sim->add_option("--seed", sim.seed, "VME reorder and data seed; 0 keeps issue order");
  c_sim->add_option("--max-cycles", sim.max_cycles, "Declare deadlock past this cycle (0 = off)")
      ->check(CLI::NonNegativeNumber);
  c_sim->add_option("--out-dir", sim.out, "Output directory");
  c_sim->add_flag("--no-eliminate", sim.no_eliminate, "Keep redundant chunk loads");
  c_sim->add_option("--shift", sim.shift, "Right shift applied to results");
  c_sim->add_option("--clip", sim.clip, "Clip results to [0, N]");
  c_sim->footer(kSimHelp);

  RooflineArgs roof;
  auto* c_roof = app.add_subcommand("roofline", "Roofline points for layers over configs");
  c_roof->add_option("--config", roof.configs, "Accelerator config JSON (repeatable)")
      ->check(CLI::ExistingFile);
  c_roof->add_option("--workload", roof.workload, "Workload JSON")->required()->check(CLI::ExistingFile);
  c_roof->add_option("--layer", roof.layers, "Layer name (repeatable; default all)");
  c_roof->add_option("--seed", roof.seed, "VME reorder seed");
  c_roof->add_option("--out-dir", roof.out, "Output directory");
  c_roof->footer(kRooflineHelp);

  UtilArgs util;
  auto* c_util = app.add_subcommand("util", "Per-process utilization timeline of one layer");
  c_util->add_option("--config", util.config, "Accelerator config JSON")->check(CLI::ExistingFile);
  c_util->add_option("--workload", util.workload, "Workload JSON")->required()->check(CLI::ExistingFile);
  c_util->add_option("--layer", util.layer, "Layer name (needed for multi-layer workloads)");
  c_util->add_option("--seed", util.seed, "VME reorder seed");
  c_util->add_option("--out-dir", util.out, "Output directory");
  c_util->footer(kUtilHelp);

  SpaceArgs space;
  auto* c_space = app.add_subcommand("space", "Sweep a config grid over a workload");
  c_space->add_option("--grid", space.grid, "Grid JSON")->required()->check(CLI::ExistingFile);
  c_space->add_option("--workload", space.workload, "Workload JSON")->required()->check(CLI::ExistingFile);
  c_space->add_option("--layer", space.layers, "Layer name (repeatable; default all)");
  c_space->add_option("--seed", space.seed, "VME reorder seed");
  c_space->add_option("--alpha", space.alpha, "Area per MAC lane");
  c_space->add_option("--beta", space.beta, "Area per scratchpad bit");
  c_space->add_option("--out-dir", space.out, "Output directory");
  c_space->footer(kSpaceHelp);

  FpArgs fpc;
  auto* c_fpc = app.add_subcommand("fp-check", "Check a floorplan for overlap, spacing, names, bounds");
  c_fpc->add_option("--floorplan", fpc.floorplan, "Floorplan JSON")->required()->check(CLI::ExistingFile);
  c_fpc->add_option("--tech", fpc.tech, "Tech table JSON")->required()->check(CLI::ExistingFile);
  c_fpc->add_option("--min-spacing", fpc.min_spacing, "Minimum macro spacing (um)")
      ->check(CLI::NonNegativeNumber);
  c_fpc->add_option("--out-dir", fpc.out, "Also write violations.csv here");
  c_fpc->add_flag("--strict", fpc.strict, "Exit 1 when any violation is found");
  c_fpc->footer(kFpHelp);

  FpArgs fpr;
  auto* c_fpr = app.add_subcommand("fp-render", "Render a floorplan to SVG");
  c_fpr->add_option("--floorplan", fpr.floorplan, "Floorplan JSON")->required()->check(CLI::ExistingFile);
  c_fpr->add_option("--tech", fpr.tech, "Tech table JSON")->required()->check(CLI::ExistingFile);
  c_fpr->add_option("--min-spacing", fpr.min_spacing, "Spacing used to highlight violations (um)")
      ->check(CLI::NonNegativeNumber);
  c_fpr->add_option("--out", fpr.out, "SVG path")->required();
  c_fpr->footer(kFpHelp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_tps) return cmd_tps(tps);
    if (*c_gen) return cmd_gen(gen);
    if (*c_sim) return cmd_sim(sim);
    if (*c_roof) return cmd_roofline(roof);
    if (*c_util) return cmd_util(util);
    if (*c_space) return cmd_space(space);
    if (*c_fpc) return cmd_fp_check(fpc);
    if (*c_fpr) return cmd_fp_render(fpr);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}
