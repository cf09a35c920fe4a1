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

#include "accel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace accel {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Fixed precision for SVG coordinates.
std::string px(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s) { return s.empty() ? 0.0 : std::stod(s); }

}  // namespace

std::int64_t stream_macs(const InstructionStream& stream, const AccelConfig& cfg) {
  std::int64_t macs = 0;
  for (const Instruction& in : stream.insns) {
    if (in.opcode != Opcode::kGemm || in.reset) continue;
    const std::int64_t uops = in.uop_end > in.uop_begin ? in.uop_end - in.uop_begin : 0;
    macs += std::int64_t{in.iter_out} * in.iter_in * uops * cfg.macs_per_cycle();
  }
  return macs;
}

RooflinePoint roofline_point(const SimReport& report, std::int64_t macs, const AccelConfig& cfg,
                             const std::string& label) {
  const std::int64_t bytes = report.dram_bytes.total();
  if (bytes <= 0) throw Error("roofline point needs nonzero DRAM bytes");
  if (report.total_cycles <= 0) throw Error("roofline point needs nonzero cycles");
  if (macs <= 0) throw Error("roofline point needs nonzero ops");
  RooflinePoint p;
  const double ops = 2.0 * static_cast<double>(macs);
  p.ops_per_byte = ops / static_cast<double>(bytes);
  p.ops_per_cycle = ops / static_cast<double>(report.total_cycles);
  p.label = label;
  p.bus_bits = cfg.axi_data_bits;
  p.peak_ops_per_cycle = peak_ops_per_cycle(cfg);
  return p;
}

RooflinePoint roofline_point(const SimReport& report, const ConvLayer& layer,
                             const AccelConfig& cfg, const std::string& label) {
  return roofline_point(report, mac_count(layer), cfg, label.empty() ? layer.name : label);
}

std::string roofline_csv(const std::vector<RooflinePoint>& points,
                         const std::vector<AccelConfig>& cfgs) {
  std::ostringstream os;
  os << "kind,label,ops_per_byte,ops_per_cycle,bus_bits,peak_ops_per_cycle\n";
  std::set<std::int64_t> peaks;
  std::set<int> buses;
  for (const AccelConfig& c : cfgs) {
    peaks.insert(peak_ops_per_cycle(c));
    buses.insert(c.axi_data_bits);
  }
  for (const RooflinePoint& p : points) {
    if (p.peak_ops_per_cycle > 0) peaks.insert(p.peak_ops_per_cycle);
    if (p.bus_bits > 0) buses.insert(p.bus_bits);
  }
  for (std::int64_t pk : peaks) {
    os << "compute_roof,peak " << pk << " ops/cycle,," << pk << ",," << pk << '\n';
  }
  for (int b : buses) {
    os << "bandwidth_roof," << b << "-bit bus,1," << num(bandwidth_roof(1.0, b)) << ',' << b << ",\n";
  }
  for (const RooflinePoint& p : points) {
    os << "point," << csv_safe(p.label) << ',' << num(p.ops_per_byte) << ',' << num(p.ops_per_cycle)
       << ',' << p.bus_bits << ',' << p.peak_ops_per_cycle << '\n';
  }
  return os.str();
}

std::string roofline_svg(const std::string& csv) {
  const auto rows = parse_csv(csv);
  std::vector<double> peaks, buses;
  struct Pt {
    double x, y;
    std::string label;
  };
  std::vector<Pt> pts;
  for (const auto& r : rows) {
    if (r.size() < 6) continue;
    if (r[0] == "compute_roof") peaks.push_back(to_double(r[3]));
    if (r[0] == "bandwidth_roof") buses.push_back(to_double(r[4]));
    if (r[0] == "point") pts.push_back({to_double(r[2]), to_double(r[3]), r[1]});
  }
  double xmin = 1, xmax = 1, ymin = 1, ymax = 1;
  bool first = true;
  auto grow = [&](double x, double y) {
    if (x <= 0 || y <= 0) return;
    if (first) {
      xmin = xmax = x;
      ymin = ymax = y;
      first = false;
    }
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  };
  for (const Pt& p : pts) grow(p.x, p.y);
  for (double pk : peaks) {
    for (double b : buses) grow(pk / (b / 8.0), pk);  // ridge points
  }
  for (double pk : peaks) grow(xmin, pk);
  const double lx0 = std::floor(std::log10(xmin)) - (xmin == xmax ? 1 : 0);
  const double lx1 = std::ceil(std::log10(xmax)) + (xmin == xmax ? 1 : 0);
  const double ly0 = std::floor(std::log10(ymin)) - (ymin == ymax ? 1 : 0);
  const double ly1 = std::ceil(std::log10(ymax)) + (ymin == ymax ? 1 : 0);
  const double W = 640, H = 480, L = 70, R = 20, T = 30, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  auto sx = [&](double x) { return L + (std::log10(x) - lx0) / std::max(1.0, lx1 - lx0) * pw; };
  auto sy = [&](double y) { return T + ph - (std::log10(y) - ly0) / std::max(1.0, ly1 - ly0) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<clipPath id=\"plot\"><rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw
     << "\" height=\"" << ph << "\"/></clipPath>\n";
  for (int k = static_cast<int>(lx0); k <= static_cast<int>(lx1); ++k) {
    const double x = sx(std::pow(10.0, k));
    os << "<line x1=\"" << px(x) << "\" y1=\"" << T << "\" x2=\"" << px(x) << "\" y2=\"" << T + ph
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << px(x) << "\" y=\"" << T + ph + 15 << "\" text-anchor=\"middle\">1e" << k
       << "</text>\n";
  }
  for (int k = static_cast<int>(ly0); k <= static_cast<int>(ly1); ++k) {
    const double y = sy(std::pow(10.0, k));
    os << "<line x1=\"" << L << "\" y1=\"" << px(y) << "\" x2=\"" << L + pw << "\" y2=\"" << px(y)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << L - 5 << "\" y=\"" << px(y + 4) << "\" text-anchor=\"end\">1e" << k
       << "</text>\n";
  }
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">Ops/Byte</text>\n";
  os << "<text x=\"15\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
     << T + ph / 2 << ")\">Ops/Cycle</text>\n";
  os << "<g clip-path=\"url(#plot)\">\n";
  const double xa = std::pow(10.0, lx0), xb = std::pow(10.0, lx1);
  for (double pk : peaks) {
    os << "<line x1=\"" << px(sx(xa)) << "\" y1=\"" << px(sy(pk)) << "\" x2=\"" << px(sx(xb))
       << "\" y2=\"" << px(sy(pk)) << "\" stroke=\"#1f77b4\" stroke-dasharray=\"6,4\"><title>peak "
       << num(pk) << " ops/cycle</title></line>\n";
  }
  for (double b : buses) {
    os << "<line x1=\"" << px(sx(xa)) << "\" y1=\"" << px(sy(bandwidth_roof(xa, static_cast<int>(b))))
       << "\" x2=\"" << px(sx(xb)) << "\" y2=\"" << px(sy(bandwidth_roof(xb, static_cast<int>(b))))
       << "\" stroke=\"#ff7f0e\" stroke-dasharray=\"3,3\"><title>" << num(b)
       << "-bit bus</title></line>\n";
  }
  os << "</g>\n";
  for (const Pt& p : pts) {
    os << "<circle cx=\"" << px(sx(p.x)) << "\" cy=\"" << px(sy(p.y))
       << "\" r=\"4\" fill=\"#d62728\"><title>" << xml_escape(p.label) << ": " << num(p.x)
       << " ops/byte, " << num(p.y) << " ops/cycle</title></circle>\n";
    os << "<text x=\"" << px(sx(p.x) + 6) << "\" y=\"" << px(sy(p.y) - 6) << "\">"
       << xml_escape(p.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

Chart roofline_chart(const std::vector<RooflinePoint>& points, const std::vector<AccelConfig>& cfgs) {
  Chart c;
  c.csv = roofline_csv(points, cfgs);
  c.svg = roofline_svg(c.csv);
  return c;
}

std::array<ProcessUtilization, 3> utilization(const SimReport& report) {
  std::array<ProcessUtilization, 3> u{};
  for (const Interval& i : report.intervals) {
    ProcessUtilization& p = u[static_cast<int>(i.process)];
    const std::int64_t len = i.end - i.start;
    if (i.kind == ActivityKind::kIdle) {
      p.idle += len;
    } else if (i.kind == ActivityKind::kBlocked) {
      p.blocked += len;
    } else {
      p.active += len;
    }
    p.total += len;
  }
  return u;
}

std::string utilization_svg(const std::string& csv) {
  const auto rows = parse_csv(csv);
  static const std::map<std::string, std::string> kColor = {
      {"GEMM", "#d62728"},     {"ALU", "#2ca02c"},      {"LOAD_INP", "#1f77b4"},
      {"LOAD_WGT", "#17becf"}, {"LOAD_ACC", "#9467bd"}, {"LOAD_UOP", "#8c564b"},
      {"STORE", "#ff7f0e"},    {"IDLE", "#ffffff"},     {"BLOCKED", "#bbbbbb"},
  };
  static const char* kRows[] = {"load", "compute", "store"};
  double total = 1;
  for (const auto& r : rows) {
    if (r.size() >= 2) total = std::max(total, to_double(r[1]));
  }
  const double W = 900, L = 70, R = 20, T = 20, bar = 30, gap = 15;
  const double pw = W - L - R;
  const double H = T + 3 * (bar + gap) + 60;
  auto sx = [&](double c) { return L + c / total * pw; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  for (int p = 0; p < 3; ++p) {
    const double y = T + p * (bar + gap);
    os << "<text x=\"" << L - 5 << "\" y=\"" << px(y + bar / 2 + 4) << "\" text-anchor=\"end\">"
       << kRows[p] << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << y << "\" width=\"" << pw << "\" height=\"" << bar
       << "\" fill=\"none\" stroke=\"black\"/>\n";
  }
  for (const auto& r : rows) {
    if (r.size() < 4 || r[3] == "IDLE") continue;
    int p = -1;
    for (int k = 0; k < 3; ++k) {
      if (r[2] == kRows[k]) p = k;
    }
    if (p < 0) continue;
    const double s = to_double(r[0]), e = to_double(r[1]);
    const auto it = kColor.find(r[3]);
    os << "<rect x=\"" << px(sx(s)) << "\" y=\"" << T + p * (bar + gap) << "\" width=\""
       << px(std::max(0.01, sx(e) - sx(s))) << "\" height=\"" << bar << "\" fill=\""
       << (it == kColor.end() ? "#000000" : it->second) << "\"><title>" << r[3] << " " << r[0]
       << "-" << r[1] << "</title></rect>\n";
  }
  const double ly = T + 3 * (bar + gap) + 10;
  os << "<text x=\"" << L << "\" y=\"" << ly << "\">0</text>\n";
  os << "<text x=\"" << L + pw << "\" y=\"" << ly << "\" text-anchor=\"end\">" << num(total)
     << " cycles</text>\n";
  double lx = L;
  for (const char* k : {"GEMM", "ALU", "LOAD_INP", "LOAD_WGT", "LOAD_ACC", "LOAD_UOP", "STORE", "BLOCKED"}) {
    os << "<rect x=\"" << lx << "\" y=\"" << ly + 12 << "\" width=\"10\" height=\"10\" fill=\""
       << kColor.at(k) << "\"/><text x=\"" << lx + 13 << "\" y=\"" << ly + 21 << "\">" << k
       << "</text>\n";
    lx += 95;
  }
  os << "</svg>\n";
  return os.str();
}

Chart utilization_timeline(const SimReport& report) {
  Chart c;
  c.csv = intervals_csv(report);
  c.svg = utilization_svg(c.csv);
  return c;
}

std::int64_t scratchpad_bits(const AccelConfig& cfg) {
  return (cfg.c_inp + cfg.c_wgt + cfg.c_acc + cfg.c_uop) * 8;
}

double area_proxy(const AccelConfig& cfg, const AreaCoeffs& coeffs) {
  if (coeffs.alpha < 0 || coeffs.beta < 0) throw Error("area coefficients must be non-negative");
  return coeffs.alpha * static_cast<double>(cfg.macs_per_cycle()) +
         coeffs.beta * static_cast<double>(scratchpad_bits(cfg));
}

std::string design_space_table(const std::vector<DesignPoint>& entries) {
  std::vector<const DesignPoint*> order;
  for (const auto& e : entries) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](const DesignPoint* a, const DesignPoint* b) { return a->area < b->area; });
  std::ostringstream os;
  os << "label,batch,block_in,block_out,macs,bus_bits,scratchpad_bits,area_proxy,total_cycles\n";
  for (const DesignPoint* e : order) {
    const AccelConfig& c = e->cfg;
    os << csv_safe(e->label) << ',' << c.batch << ',' << c.block_in << ',' << c.block_out << ','
       << c.macs_per_cycle() << ',' << c.axi_data_bits << ',' << scratchpad_bits(c) << ','
       << num(e->area) << ',' << e->total_cycles << '\n';
  }
  return os.str();
}

WorkloadRun simulate_workload(const std::vector<ConvLayer>& layers, const AccelConfig& cfg,
                              const SimOptions& options, bool eliminate, bool keep_reports) {
  WorkloadRun w;
  for (const ConvLayer& layer : layers) {
    LayerRun lr;
    lr.layer = layer;
    lr.stream = compile_layer(layer, cfg);
    if (eliminate) lr.stream = eliminate_redundant_loads(lr.stream);
    lr.report = run(lr.stream, cfg, options);
    lr.macs = mac_count(layer);
    lr.cycles = lr.report.total_cycles;
    lr.dram_bytes = lr.report.dram_bytes.total();
    w.total_cycles += lr.report.total_cycles;
    w.dram_bytes += lr.report.dram_bytes.total();
    w.macs += lr.macs;
    if (!lr.report.completed) w.completed = false;
    if (!keep_reports) {
      lr.stream = {};
      lr.report = {};
    }
    w.layers.push_back(std::move(lr));
  }
  return w;
}

}  // namespace accel
