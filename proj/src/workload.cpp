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

#include "accel/workload.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace accel {

namespace {

constexpr std::pair<LayerKind, std::string_view> kKinds[] = {
    {LayerKind::kConv, "conv"},
    {LayerKind::kDepthwise, "depthwise"},
    {LayerKind::kDense, "dense"},
    {LayerKind::kMaxPool, "maxpool"},
    {LayerKind::kAvgPool, "avgpool"},
};

std::string label(const ConvLayer& l) { return l.name.empty() ? std::string("layer") : l.name; }

[[noreturn]] void bad(const ConvLayer& l, const std::string& what) {
  throw WorkloadError(label(l) + ": " + what);
}

int round_up(int v, int m) { return (v + m - 1) / m * m; }

nlohmann::ordered_json to_json(const ConvLayer& l) {
  nlohmann::ordered_json j;
  if (!l.name.empty()) j["name"] = l.name;
  j["kind"] = std::string(to_string(l.kind));
  j["b"] = l.b;
  j["h"] = l.h;
  j["w"] = l.w;
  j["kh"] = l.kh;
  j["kw"] = l.kw;
  j["fi"] = l.fi;
  j["fo"] = l.fo;
  j["ph"] = l.ph;
  j["pw"] = l.pw;
  j["sh"] = l.sh;
  j["sw"] = l.sw;
  return j;
}

ConvLayer from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw WorkloadError("layer entry must be an object");
  ConvLayer l;
  struct IntKey {
    const char* key;
    int ConvLayer::*member;
  };
  static const IntKey keys[] = {
      {"b", &ConvLayer::b},   {"h", &ConvLayer::h},   {"w", &ConvLayer::w},
      {"kh", &ConvLayer::kh}, {"kw", &ConvLayer::kw}, {"fi", &ConvLayer::fi},
      {"fo", &ConvLayer::fo}, {"ph", &ConvLayer::ph}, {"pw", &ConvLayer::pw},
      {"sh", &ConvLayer::sh}, {"sw", &ConvLayer::sw},
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "name") {
      if (!value.is_string()) throw WorkloadError("layer name must be a string");
      l.name = value.get<std::string>();
      continue;
    }
    if (key == "kind") {
      if (!value.is_string()) throw WorkloadError("layer kind must be a string");
      l.kind = layer_kind_from_string(value.get<std::string>());
      continue;
    }
    bool known = false;
    for (const auto& k : keys) {
      if (key == k.key) {
        if (!value.is_number_integer()) bad(l, std::string(k.key) + " must be an integer");
        l.*(k.member) = value.get<int>();
        known = true;
      }
    }
    if (!known) bad(l, "unknown layer key '" + key + "'");
  }
  l.validate();
  return l;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, text] : kKinds) {
    if (k == kind) return text;
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (const auto& [k, text] : kKinds) {
    if (text == name) return k;
  }
  throw WorkloadError("unknown layer kind '" + std::string(name) + "'");
}

void ConvLayer::validate() const {
  if (b < 1 || h < 1 || w < 1 || kh < 1 || kw < 1 || fi < 1 || fo < 1) {
    bad(*this, "b, h, w, kh, kw, fi, fo must be positive");
  }
  if (ph < 0 || pw < 0) bad(*this, "padding must be non-negative");
  if (sh < 1 || sw < 1) bad(*this, "strides must be >= 1");
  if (h + 2 * ph < kh) bad(*this, "h + 2*ph < kh");
  if (w + 2 * pw < kw) bad(*this, "w + 2*pw < kw");
  if ((kind == LayerKind::kDepthwise || kind == LayerKind::kMaxPool ||
       kind == LayerKind::kAvgPool) &&
      fi != fo) {
    bad(*this, std::string(to_string(kind)) + " requires fi == fo");
  }
  if (kind == LayerKind::kDense &&
      (h != 1 || w != 1 || kh != 1 || kw != 1 || ph != 0 || pw != 0)) {
    bad(*this, "dense requires h = w = kh = kw = 1 and no padding");
  }
}

OutputDims output_dims(const ConvLayer& l) {
  return {(l.h + 2 * l.ph - l.kh) / l.sh + 1, (l.w + 2 * l.pw - l.kw) / l.sw + 1};
}

std::int64_t mac_count(const ConvLayer& l) {
  const auto [oh, ow] = output_dims(l);
  const std::int64_t spatial = std::int64_t{l.b} * oh * ow;
  switch (l.kind) {
    case LayerKind::kConv: return spatial * l.fo * l.fi * l.kh * l.kw;
    case LayerKind::kDense: return std::int64_t{l.b} * l.fo * l.fi;
    case LayerKind::kDepthwise:
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool: return spatial * l.fo * l.kh * l.kw;
  }
  return 0;
}

ConvLayer pad_channels(const ConvLayer& layer, const AccelConfig& cfg) {
  ConvLayer p = layer;
  if (layer.uses_alu()) {
    p.fi = round_up(layer.fi, cfg.block_out);
    p.fo = p.fi;
  } else {
    p.fi = round_up(layer.fi, cfg.block_in);
    p.fo = round_up(layer.fo, cfg.block_out);
  }
  return p;
}

std::vector<ConvLayer> load_workload(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw WorkloadError(std::string("workload parse error: ") + e.what());
  }
  if (!doc.is_array()) throw WorkloadError("workload must be a JSON array of layers");
  std::vector<ConvLayer> layers;
  layers.reserve(doc.size());
  for (const auto& entry : doc) layers.push_back(from_json(entry));
  return layers;
}

std::vector<ConvLayer> load_workload_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WorkloadError("cannot open workload file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_workload(ss.str());
}

std::string serialize_workload(const std::vector<ConvLayer>& layers) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out += "  " + to_json(layers[i]).dump();
    out += (i + 1 < layers.size()) ? ",\n" : "\n";
  }
  out += "]\n";
  return out;
}

std::string layer_to_json(const ConvLayer& layer) { return to_json(layer).dump(); }

ConvLayer layer_from_json(std::string_view json_text) {
  try {
    return from_json(nlohmann::json::parse(json_text));
  } catch (const nlohmann::json::parse_error& e) {
    throw WorkloadError(std::string("layer parse error: ") + e.what());
  }
}

}  // namespace accel
