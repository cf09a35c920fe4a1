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

#include "accel/tps.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace accel {

namespace {

std::vector<int> divisors(int n) {
  std::vector<int> out;
  for (int d = 1; d <= n; ++d) {
    if (n % d == 0) out.push_back(d);
  }
  return out;
}

std::int64_t to_bytes(std::int64_t elems, int elem_bits) { return ceil_div(elems * elem_bits, 8); }

// Input window along one spatial axis for an outer factor t on extent n.
std::int64_t window(int n, int t, int pad, int k, int s) {
  return floor_div(n / t + 2 * pad - k, s) * s + k;
}

struct Elems {
  std::int64_t s_inp, s_wgt, s_acc;
};

Elems usage_elems(const ConvLayer& l, const AccelConfig& cfg, const TileDims& d,
                  const TilingParams& p) {
  const InnerTile in = inner_tile(d, p);
  const std::int64_t threads = std::int64_t{p.oc_n} * p.h_n;
  const std::int64_t wh = window(l.h, p.th_o, l.ph, l.kh, l.sh);
  const std::int64_t ww = window(l.w, p.tw_o, l.pw, l.kw, l.sw);
  Elems e{};
  e.s_inp = std::int64_t{in.tb_i} * (d.di / p.tci_o) * wh * ww * cfg.batch * cfg.block_in * threads;
  e.s_wgt = std::int64_t{d.do_} * d.di * l.kh * l.kw * cfg.block_out * cfg.block_in /
            (std::int64_t{p.tco_o} * p.tci_o) * threads;
  e.s_acc = (std::int64_t{d.nb} * d.do_ * d.oh * d.ow * cfg.batch * cfg.block_out /
                 (std::int64_t{p.tb_o} * p.tco_o * p.th_o * p.tw_o) +
             std::int64_t{l.fo} * l.b / (std::int64_t{p.tb_o} * p.tco_o)) *
            threads;
  return e;
}

void require_legal(const ConvLayer& l, const AccelConfig& cfg, const TilingParams& p) {
  if (auto why = check_params(l, cfg, p)) throw TilingError(p.to_string() + ": " + *why);
}

std::int64_t outer_multiplier(const TilingParams& p) {
  return std::int64_t{p.tb_o} * (p.th_o / p.h_n) * (p.tco_o / p.oc_n) * p.tw_o * p.tci_o;
}

TpsResult score(const ConvLayer& l, const AccelConfig& cfg, const TileDims& d,
                const TilingParams& p) {
  const Elems e = usage_elems(l, cfg, d, p);
  TpsResult r;
  r.params = p;
  r.s_inp = to_bytes(e.s_inp, cfg.inp_elem_bits);
  r.s_wgt = to_bytes(e.s_wgt, cfg.wgt_elem_bits);
  r.s_acc = to_bytes(e.s_acc, cfg.acc_elem_bits);
  const std::int64_t m = outer_multiplier(p);
  r.l_inp = m * r.s_inp;
  r.l_wgt = m * r.s_wgt;
  r.l_acc = to_bytes(std::int64_t{p.tb_o} * p.th_o * p.tw_o * l.fo, cfg.acc_elem_bits);
  r.u_inp = cfg.c_inp - r.s_inp;
  r.u_wgt = cfg.c_wgt - r.s_wgt;
  r.u_acc = cfg.c_acc - r.s_acc;
  r.feasible = r.u_inp >= 0 && r.u_wgt >= 0 && r.u_acc >= 0;
  r.total_cost = r.l_inp + r.l_wgt + r.l_acc;
  return r;
}

constexpr std::array<std::pair<int, int>, 3> kThreads{{{1, 1}, {2, 1}, {1, 2}}};

}  // namespace

std::string TilingParams::to_string() const {
  std::ostringstream os;
  os << "(tb_o=" << tb_o << ", th_o=" << th_o << ", tw_o=" << tw_o << ", tco_o=" << tco_o
     << ", tci_o=" << tci_o << ", oc_n=" << oc_n << ", h_n=" << h_n << ")";
  return os.str();
}

TileDims tile_dims(const ConvLayer& layer, const AccelConfig& cfg) {
  layer.validate();
  if (layer.b % cfg.batch != 0) {
    throw TilingError("b=" + std::to_string(layer.b) + " is not a multiple of batch=" +
                      std::to_string(cfg.batch));
  }
  if (layer.fi % cfg.block_in != 0 || layer.fo % cfg.block_out != 0) {
    throw TilingError("layer channels are not padded to block_in/block_out (fi=" +
                      std::to_string(layer.fi) + ", fo=" + std::to_string(layer.fo) + ")");
  }
  const OutputDims od = output_dims(layer);
  return {layer.b / cfg.batch, od.oh, od.ow, layer.fo / cfg.block_out, layer.fi / cfg.block_in};
}

InnerTile inner_tile(const TileDims& d, const TilingParams& p) {
  return {d.nb / p.tb_o, d.oh / p.th_o, d.ow / p.tw_o, d.do_ / p.tco_o, d.di / p.tci_o};
}

std::optional<std::string> check_params(const ConvLayer& l, const AccelConfig& cfg,
                                        const TilingParams& p) {
  const TileDims d = tile_dims(l, cfg);
  auto divides = [](int f, int n) { return f >= 1 && n % f == 0; };
  if (!divides(p.tb_o, d.nb)) return "tb_o does not divide b/batch";
  if (!divides(p.th_o, d.oh)) return "th_o does not divide oh";
  if (!divides(p.tw_o, d.ow)) return "tw_o does not divide ow";
  if (!divides(p.tco_o, d.do_)) return "tco_o does not divide fo/block_out";
  if (!divides(p.tci_o, d.di)) return "tci_o does not divide fi/block_in";
  if ((p.oc_n != 1 && p.oc_n != 2) || (p.h_n != 1 && p.h_n != 2)) return "thread factor not in {1,2}";
  if (p.oc_n == 2 && p.h_n == 2) return "oc_n and h_n both 2";
  if (p.oc_n == 2 && p.tco_o % 2 != 0) return "oc_n=2 needs even tco_o";
  if (p.h_n == 2 && p.th_o % 2 != 0) return "h_n=2 needs even th_o";
  if (l.h % p.th_o != 0) return "h/th_o is not an integer";
  if (l.w % p.tw_o != 0) return "w/tw_o is not an integer";
  if (window(l.h, p.th_o, l.ph, l.kh, l.sh) <= 0) return "input row window <= 0";
  if (window(l.w, p.tw_o, l.pw, l.kw, l.sw) <= 0) return "input column window <= 0";
  return std::nullopt;
}

std::array<std::int64_t, 3> scratchpad_usage(const ConvLayer& layer, const AccelConfig& cfg,
                                             const TilingParams& params) {
  const TpsResult r = evaluate(layer, cfg, params);
  return {r.s_inp, r.s_wgt, r.s_acc};
}

std::array<std::int64_t, 3> dram_cost(const ConvLayer& layer, const AccelConfig& cfg,
                                      const TilingParams& params) {
  const TpsResult r = evaluate(layer, cfg, params);
  return {r.l_inp, r.l_wgt, r.l_acc};
}

TpsResult evaluate(const ConvLayer& layer, const AccelConfig& cfg, const TilingParams& params) {
  require_legal(layer, cfg, params);
  return score(layer, cfg, tile_dims(layer, cfg), params);
}

std::vector<Candidate> enumerate_candidates(const ConvLayer& layer, const AccelConfig& cfg) {
  const TileDims d = tile_dims(layer, cfg);
  const auto db = divisors(d.nb), dh = divisors(d.oh), dw = divisors(d.ow);
  const auto dco = divisors(d.do_), dci = divisors(d.di);
  std::vector<Candidate> out;
  out.reserve(db.size() * dh.size() * dw.size() * dco.size() * dci.size() * kThreads.size());
  for (int tb : db)
    for (int th : dh)
      for (int tw : dw)
        for (int tco : dco)
          for (int tci : dci)
            for (auto [ocn, hn] : kThreads) {
              Candidate c;
              c.params = {tb, th, tw, tco, tci, ocn, hn};
              c.rejected = check_params(layer, cfg, c.params);
              if (!c.rejected) c.result = score(layer, cfg, d, c.params);
              out.push_back(std::move(c));
            }
  return out;
}

bool better(const TpsResult& a, const TpsResult& b) {
  if (a.total_cost != b.total_cost) return a.total_cost < b.total_cost;
  if (a.s_acc != b.s_acc) return a.s_acc < b.s_acc;
  return a.params.key() < b.params.key();
}

SearchOutcome search(const ConvLayer& layer, const AccelConfig& cfg, const SearchOptions& options) {
  SearchOutcome out;
  std::optional<TpsResult> best;
  // Closest miss, for the diagnostic: smallest worst-case usage/capacity ratio.
  double closest = -1.0;
  const char* closest_name = "";
  std::int64_t closest_s = 0, closest_c = 0;

  for (const Candidate& c : enumerate_candidates(layer, cfg)) {
    ++out.candidates;
    if (c.rejected) continue;
    if (options.oc_n && c.params.oc_n != *options.oc_n) continue;
    if (options.h_n && c.params.h_n != *options.h_n) continue;
    ++out.legal;
    const TpsResult& r = c.result;
    if (r.feasible) {
      ++out.feasible;
      if (!best || better(r, *best)) best = r;
      if (options.keep_ranking) out.ranking.push_back(r);
      continue;
    }
    const std::array<std::tuple<const char*, std::int64_t, std::int64_t>, 3> use{{
        {"inp", r.s_inp, cfg.c_inp},
        {"wgt", r.s_wgt, cfg.c_wgt},
        {"acc", r.s_acc, cfg.c_acc},
    }};
    double worst = 0.0;
    std::size_t worst_i = 0;
    for (std::size_t i = 0; i < use.size(); ++i) {
      const double ratio =
          static_cast<double>(std::get<1>(use[i])) / static_cast<double>(std::get<2>(use[i]));
      if (ratio > worst) {
        worst = ratio;
        worst_i = i;
      }
    }
    if (closest < 0 || worst < closest) {
      closest = worst;
      closest_name = std::get<0>(use[worst_i]);
      closest_s = std::get<1>(use[worst_i]);
      closest_c = std::get<2>(use[worst_i]);
    }
  }
  if (!best) {
    std::ostringstream os;
    os << "no feasible tiling";
    if (!layer.name.empty()) os << " for " << layer.name;
    if (closest >= 0) {
      os << ": tightest constraint s_" << closest_name << " (best candidate needs " << closest_s
         << " bytes, capacity " << closest_c << ")";
    } else {
      os << ": no legal candidate";
    }
    throw TilingError(os.str());
  }
  out.best = *best;
  if (options.keep_ranking) std::sort(out.ranking.begin(), out.ranking.end(), better);
  return out;
}

TpsResult fallback_schedule(const ConvLayer& layer, const AccelConfig& cfg) {
  const TileDims d = tile_dims(layer, cfg);
  auto largest = [](int n, auto&& ok) {
    for (int f = n; f >= 1; --f) {
      if (n % f == 0 && ok(f)) return f;
    }
    return 1;
  };
  TilingParams p;
  p.tb_o = d.nb;
  p.th_o = largest(d.oh, [&](int f) {
    return layer.h % f == 0 && window(layer.h, f, layer.ph, layer.kh, layer.sh) > 0;
  });
  p.tw_o = largest(d.ow, [&](int f) {
    return layer.w % f == 0 && window(layer.w, f, layer.pw, layer.kw, layer.sw) > 0;
  });
  p.tco_o = d.do_;
  p.tci_o = d.di;
  require_legal(layer, cfg, p);
  TpsResult r = score(layer, cfg, d, p);
  if (!r.feasible) {
    std::ostringstream os;
    os << "no feasible tiling";
    if (!layer.name.empty()) os << " for " << layer.name;
    os << ": fallback " << p.to_string() << " needs s_inp=" << r.s_inp << ", s_wgt=" << r.s_wgt
       << ", s_acc=" << r.s_acc << " bytes";
    throw TilingError(os.str());
  }
  return r;
}

std::string ranking_csv(const std::vector<TpsResult>& results, int top_k) {
  std::ostringstream os;
  os << "rank,tb_o,th_o,tw_o,tco_o,tci_o,oc_n,h_n,s_inp,s_wgt,s_acc,l_inp,l_wgt,l_acc,"
        "u_inp,u_wgt,u_acc,feasible,total_cost\n";
  const std::size_t n =
      top_k > 0 ? std::min(results.size(), static_cast<std::size_t>(top_k)) : results.size();
  for (std::size_t i = 0; i < n; ++i) {
    const TpsResult& r = results[i];
    const TilingParams& p = r.params;
    os << i + 1 << ',' << p.tb_o << ',' << p.th_o << ',' << p.tw_o << ',' << p.tco_o << ','
       << p.tci_o << ',' << p.oc_n << ',' << p.h_n << ',' << r.s_inp << ',' << r.s_wgt << ','
       << r.s_acc << ',' << r.l_inp << ',' << r.l_wgt << ',' << r.l_acc << ',' << r.u_inp << ','
       << r.u_wgt << ',' << r.u_acc << ',' << (r.feasible ? 1 : 0) << ',' << r.total_cost << '\n';
  }
  return os.str();
}

std::string result_json(const TpsResult& r) {
  nlohmann::ordered_json j;
  const TilingParams& p = r.params;
  j["params"] = {{"tb_o", p.tb_o}, {"th_o", p.th_o},   {"tw_o", p.tw_o}, {"tco_o", p.tco_o},
                 {"tci_o", p.tci_o}, {"oc_n", p.oc_n}, {"h_n", p.h_n}};
  j["s_inp"] = r.s_inp;
  j["s_wgt"] = r.s_wgt;
  j["s_acc"] = r.s_acc;
  j["l_inp"] = r.l_inp;
  j["l_wgt"] = r.l_wgt;
  j["l_acc"] = r.l_acc;
  j["u_inp"] = r.u_inp;
  j["u_wgt"] = r.u_wgt;
  j["u_acc"] = r.u_acc;
  j["feasible"] = r.feasible;
  j["total_cost"] = r.total_cost;
  return j.dump();
}

}  // namespace accel
