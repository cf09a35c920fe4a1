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

#include "accel/floorplan.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace accel {

namespace {

using Mat = std::array<int, 4>;

Mat mul(const Mat& a, const Mat& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
          a[2] * b[1] + a[3] * b[3]};
}

Orient from_matrix(const Mat& m) {
  for (Orient o : kAllOrients) {
    if (orient_matrix(o) == m) return o;
  }
  throw FloorplanError("matrix is not an orientation");
}

struct Transform {
  Orient o = Orient::kR0;
  Nm tx = 0;
  Nm ty = 0;

  std::pair<Nm, Nm> apply(Nm x, Nm y) const {
    const Mat m = orient_matrix(o);
    return {m[0] * x + m[1] * y + tx, m[2] * x + m[3] * y + ty};
  }

  Rect apply(const Rect& r) const {
    const auto [ax, ay] = apply(r.x0, r.y0);
    const auto [bx, by] = apply(r.x1, r.y1);
    return {std::min(ax, bx), std::min(ay, by), std::max(ax, bx), std::max(ay, by)};
  }

  // this after other
  Transform then_local(const Transform& local) const {
    Transform t;
    t.o = compose(o, local.o);
    const auto [x, y] = apply(local.tx, local.ty);
    t.tx = x;
    t.ty = y;
    return t;
  }
};

// Transform of a child box into its parent's frame, lower left on (x, y).
Transform placement(const FpNode& node, Nm x, Nm y) {
  const auto [w, h] = extent(node);
  Transform t{node.orientation, 0, 0};
  const Rect r = t.apply(Rect{0, 0, w, h});
  t.tx = x - r.x0;
  t.ty = y - r.y0;
  return t;
}

void check_name(const std::string& name) {
  if (name.empty()) throw FloorplanError("instance name is empty");
  if (name.find('/') != std::string::npos) {
    throw FloorplanError("instance name '" + name + "' contains '/'");
  }
}

std::string substitute(std::string pattern, int r, int c, int i) {
  auto rep = [&](const std::string& key, int v) {
    for (std::size_t p = pattern.find(key); p != std::string::npos; p = pattern.find(key, p)) {
      pattern.replace(p, key.size(), std::to_string(v));
    }
  };
  rep("{r}", r);
  rep("{c}", c);
  rep("{i}", i);
  return pattern;
}

struct Walk {
  std::vector<PlacedRect> rects;
  std::vector<Violation> bounds;
};

void visit(const FpNode& node, const Transform& abs, const std::string& path, int depth, Walk& w) {
  const auto [width, height] = extent(node);
  PlacedRect pr;
  pr.path = path;
  pr.rect = abs.apply(Rect{0, 0, width, height});
  pr.orientation = abs.o;
  pr.macro = node.kind == FpKind::kMacro;
  pr.depth = depth;
  w.rects.push_back(pr);
  for (const FpChild& c : node.children) {
    const Transform local = placement(c.node, c.x, c.y);
    const std::string child_path = path + "/" + c.node.name;
    if (node.bound) {
      const auto [cw, ch] = extent(c.node);
      const Rect r = local.apply(Rect{0, 0, cw, ch});
      const Rect& b = *node.bound;
      if (r.x0 < b.x0 || r.y0 < b.y0 || r.x1 > b.x1 || r.y1 > b.y1) {
        std::ostringstream os;
        os << child_path << " escapes the bound of " << path;
        w.bounds.push_back({ViolationKind::kOutOfBounds, child_path, path, os.str()});
      }
    }
    visit(c.node, abs.then_local(local), child_path, depth + 1, w);
  }
}

std::string um(Nm v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", nm_to_um(v));
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

FpNode parse_node(const nlohmann::json& j, const TechTable& tech) {
  static const std::set<std::string> kKeys = {"name",  "kind",  "orientation", "bound", "children",
                                              "macro", "rows",  "cols",        "pitch_x", "pitch_y",
                                              "pattern", "proto", "x",         "y"};
  if (!j.is_object()) throw FloorplanError("floorplan node must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!kKeys.count(k)) throw FloorplanError("unknown floorplan key '" + k + "'");
  }
  const std::string name = j.value("name", "");
  const std::string kind = j.value("kind", "hierarchy");
  const Orient o = orient_from_string(j.value("orientation", "R0"));
  FpNode n;
  if (kind == "macro") {
    const std::string m = j.value("macro", name);
    auto it = tech.macros.find(m);
    if (it == tech.macros.end()) throw FloorplanError("macro '" + m + "' is not in the tech table");
    n = make_macro(name, it->second.first, it->second.second, o);
    n.macro = m;
  } else if (kind == "array") {
    if (!j.contains("proto")) throw FloorplanError("array '" + name + "' has no proto");
    n = array(parse_node(j.at("proto"), tech), j.value("rows", 1), j.value("cols", 1),
              j.value("pitch_x", 0.0), j.value("pitch_y", 0.0), j.value("pattern", "{r}_{c}"), name);
    n.orientation = o;
  } else if (kind == "hierarchy") {
    n = make_hierarchy(name, o);
    if (j.contains("children")) {
      for (const auto& c : j.at("children")) {
        add_child(n, parse_node(c, tech), c.value("x", 0.0), c.value("y", 0.0));
      }
    }
  } else {
    throw FloorplanError("unknown node kind '" + kind + "'");
  }
  if (j.contains("bound")) {
    const auto& b = j.at("bound");
    if (!b.is_array() || b.size() != 4) throw FloorplanError("bound must be [x0, y0, x1, y1]");
    n.bound = Rect{um_to_nm(b[0].get<double>()), um_to_nm(b[1].get<double>()),
                   um_to_nm(b[2].get<double>()), um_to_nm(b[3].get<double>())};
  }
  return n;
}

}  // namespace

Nm um_to_nm(double v) { return static_cast<Nm>(std::llround(v * 1000.0)); }

std::string_view to_string(Orient o) {
  switch (o) {
    case Orient::kR0: return "R0";
    case Orient::kR90: return "R90";
    case Orient::kR180: return "R180";
    case Orient::kR270: return "R270";
    case Orient::kMX: return "MX";
    case Orient::kMY: return "MY";
    case Orient::kMX90: return "MX90";
    case Orient::kMY90: return "MY90";
  }
  return "?";
}

Orient orient_from_string(std::string_view s) {
  for (Orient o : kAllOrients) {
    if (to_string(o) == s) return o;
  }
  throw FloorplanError("unknown orientation '" + std::string(s) + "'");
}

std::array<int, 4> orient_matrix(Orient o) {
  switch (o) {
    case Orient::kR0: return {1, 0, 0, 1};
    case Orient::kR90: return {0, -1, 1, 0};
    case Orient::kR180: return {-1, 0, 0, -1};
    case Orient::kR270: return {0, 1, -1, 0};
    case Orient::kMX: return {1, 0, 0, -1};
    case Orient::kMY: return {-1, 0, 0, 1};
    case Orient::kMX90: return {0, 1, 1, 0};
    case Orient::kMY90: return {0, -1, -1, 0};
  }
  return {1, 0, 0, 1};
}

Orient compose(Orient a, Orient b) { return from_matrix(mul(orient_matrix(a), orient_matrix(b))); }

Orient inverse(Orient o) {
  for (Orient c : kAllOrients) {
    if (compose(o, c) == Orient::kR0) return c;
  }
  throw FloorplanError("orientation without inverse");
}

TechTable load_tech(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FloorplanError(std::string("tech table parse error: ") + e.what());
  }
  if (!j.is_object()) throw FloorplanError("tech table must be an object");
  TechTable t;
  for (const auto& [name, dims] : j.items()) {
    const double w = dims.at("width").get<double>(), h = dims.at("height").get<double>();
    if (w <= 0 || h <= 0) throw FloorplanError("macro '" + name + "' needs positive dimensions");
    t.macros[name] = {w, h};
  }
  return t;
}

FpNode make_macro(const std::string& name, double width_um, double height_um, Orient orientation) {
  check_name(name);
  FpNode n;
  n.name = name;
  n.kind = FpKind::kMacro;
  n.macro = name;
  n.width = um_to_nm(width_um);
  n.height = um_to_nm(height_um);
  if (n.width <= 0 || n.height <= 0) {
    throw FloorplanError("macro '" + name + "' needs positive dimensions");
  }
  n.orientation = orientation;
  return n;
}

FpNode make_hierarchy(const std::string& name, Orient orientation) {
  check_name(name);
  FpNode n;
  n.name = name;
  n.orientation = orientation;
  return n;
}

void add_child(FpNode& parent, FpNode child, double x_um, double y_um) {
  if (parent.kind == FpKind::kMacro) {
    throw FloorplanError("macro '" + parent.name + "' cannot have children");
  }
  check_name(child.name);
  parent.children.push_back({std::move(child), um_to_nm(x_um), um_to_nm(y_um)});
}

std::pair<Nm, Nm> extent(const FpNode& node) {
  if (node.kind == FpKind::kMacro) return {node.width, node.height};
  if (node.bound) return {node.bound->x1, node.bound->y1};
  Nm w = 0, h = 0;
  for (const FpChild& c : node.children) {
    const auto [cw, ch] = extent(c.node);
    const Rect r = placement(c.node, c.x, c.y).apply(Rect{0, 0, cw, ch});
    w = std::max(w, r.x1);
    h = std::max(h, r.y1);
  }
  return {w, h};
}

FpNode array(const FpNode& proto, int rows, int cols, double pitch_x_um, double pitch_y_um,
             const std::string& name_pattern, const std::string& name) {
  if (rows < 1 || cols < 1) throw FloorplanError("array needs rows, cols >= 1");
  FpNode a = make_hierarchy(name);
  std::set<std::string> used;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      FpNode inst = proto;
      inst.name = substitute(name_pattern, r, c, r * cols + c);
      if (!used.insert(inst.name).second) {
        throw FloorplanError("name-pattern collision: '" + name_pattern + "' gives '" + inst.name +
                             "' twice");
      }
      add_child(a, std::move(inst), c * pitch_x_um, r * pitch_y_um);
    }
  }
  return a;
}

std::vector<PlacedRect> flatten(const FpNode& root) {
  Walk w;
  visit(root, placement(root, 0, 0), root.name, 0, w);
  return w.rects;
}

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kOverlap: return "overlap";
    case ViolationKind::kSpacing: return "spacing";
    case ViolationKind::kDuplicateName: return "duplicate_name";
    case ViolationKind::kOutOfBounds: return "out_of_bounds";
  }
  return "?";
}

std::vector<Violation> check(const FpNode& root, double min_spacing_um) {
  Walk w;
  visit(root, placement(root, 0, 0), root.name, 0, w);
  std::vector<Violation> out = std::move(w.bounds);
  const Nm s = um_to_nm(min_spacing_um);

  std::map<std::string, int> seen;
  for (const PlacedRect& r : w.rects) ++seen[r.path];
  for (const auto& [path, n] : seen) {
    if (n > 1) {
      out.push_back({ViolationKind::kDuplicateName, path, "",
                     path + " names " + std::to_string(n) + " instances"});
    }
  }

  std::vector<const PlacedRect*> macros;
  for (const PlacedRect& r : w.rects) {
    if (r.macro) macros.push_back(&r);
  }
  for (std::size_t i = 0; i < macros.size(); ++i) {
    for (std::size_t j = i + 1; j < macros.size(); ++j) {
      const Rect& a = macros[i]->rect;
      const Rect& b = macros[j]->rect;
      std::string pa = macros[i]->path, pb = macros[j]->path;
      if (pb < pa) std::swap(pa, pb);
      const Nm dx = std::max<Nm>({0, b.x0 - a.x1, a.x0 - b.x1});
      const Nm dy = std::max<Nm>({0, b.y0 - a.y1, a.y0 - b.y1});
      const bool overlap = a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
      if (overlap) {
        out.push_back({ViolationKind::kOverlap, pa, pb, pa + " overlaps " + pb});
      } else if (s > 0 && dx * dx + dy * dy < s * s) {
        const double gap = std::sqrt(static_cast<double>(dx * dx + dy * dy)) / 1000.0;
        std::ostringstream os;
        os << pa << " and " << pb << " are " << gap << " um apart, minimum " << min_spacing_um;
        out.push_back({ViolationKind::kSpacing, pa, pb, os.str()});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Violation& x, const Violation& y) {
    return std::tie(x.kind, x.a, x.b) < std::tie(y.kind, y.a, y.b);
  });
  return out;
}

std::int64_t pipe_stages(Point a, Point b, double reach_um_per_cycle) {
  const Nm reach = um_to_nm(reach_um_per_cycle);
  if (reach <= 0) throw FloorplanError("reach must be positive");
  const Nm d = std::abs(um_to_nm(a.x) - um_to_nm(b.x)) + std::abs(um_to_nm(a.y) - um_to_nm(b.y));
  return (d + reach - 1) / reach;
}

std::int64_t buffer_tree_depth(Point source, const std::vector<Point>& sinks, double reach_um,
                               int max_fanout) {
  if (sinks.empty()) throw FloorplanError("buffer tree needs at least one sink");
  if (max_fanout < 2) throw FloorplanError("max_fanout must be at least 2");
  std::int64_t stages = 0;
  for (const Point& p : sinks) stages = std::max(stages, pipe_stages(source, p, reach_um));
  std::int64_t levels = 0;
  for (std::uint64_t cap = 1; cap < sinks.size(); cap *= static_cast<std::uint64_t>(max_fanout)) {
    ++levels;
  }
  return std::max(stages, levels);
}

std::string render_svg(const FpNode& root, const std::vector<Violation>& violations) {
  const std::vector<PlacedRect> rects = flatten(root);
  std::set<std::string> flagged;
  for (const Violation& v : violations) {
    flagged.insert(v.a);
    if (!v.b.empty()) flagged.insert(v.b);
  }
  Rect all = rects.front().rect;
  for (const PlacedRect& r : rects) {
    all.x0 = std::min(all.x0, r.rect.x0);
    all.y0 = std::min(all.y0, r.rect.y0);
    all.x1 = std::max(all.x1, r.rect.x1);
    all.y1 = std::max(all.y1, r.rect.y1);
  }
  const double span = static_cast<double>(std::max<Nm>({all.width(), all.height(), 1}));
  const double scale = 760.0 / span, margin = 20.0;
  const double W = all.width() * scale + 2 * margin, H = all.height() * scale + 2 * margin;
  auto fx = [&](Nm x) { return margin + (x - all.x0) * scale; };
  auto fy = [&](Nm y) { return margin + (all.y1 - y) * scale; };
  auto f2 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  static const char* kFill[] = {"#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#4292c6"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f2(W) << "\" height=\"" << f2(H)
     << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  os << "<rect width=\"" << f2(W) << "\" height=\"" << f2(H) << "\" fill=\"white\"/>\n";
  for (const PlacedRect& r : rects) {
    if (r.rect.width() <= 0 || r.rect.height() <= 0) continue;
    const bool bad = flagged.count(r.path) > 0;
    const char* fill = r.macro ? "#fdd49e" : kFill[std::min(r.depth, 5)];
    os << "<rect x=\"" << f2(fx(r.rect.x0)) << "\" y=\"" << f2(fy(r.rect.y1)) << "\" width=\""
       << f2(r.rect.width() * scale) << "\" height=\"" << f2(r.rect.height() * scale)
       << "\" fill=\"" << fill << "\" fill-opacity=\"" << (r.macro ? "0.8" : "0.5")
       << "\" stroke=\"" << (bad ? "#e31a1c" : "#333333") << "\" stroke-width=\""
       << (bad ? "2" : "0.5") << "\"" << (r.macro ? "" : " stroke-dasharray=\"4,2\"") << "><title>"
       << r.path << " " << to_string(r.orientation) << " (" << um(r.rect.x0) << ", "
       << um(r.rect.y0) << ") - (" << um(r.rect.x1) << ", " << um(r.rect.y1)
       << ")</title></rect>\n";
  }
  os << "</svg>\n";
  return os.str();
}

FpNode load_floorplan(std::string_view json_text, const TechTable& tech) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FloorplanError(std::string("floorplan parse error: ") + e.what());
  }
  try {
    return parse_node(j, tech);
  } catch (const nlohmann::json::exception& e) {
    throw FloorplanError(std::string("floorplan field error: ") + e.what());
  }
}

std::string violations_csv(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << "kind,a,b,message\n";
  for (const Violation& x : v) {
    std::string msg = x.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    os << to_string(x.kind) << ',' << x.a << ',' << x.b << ',' << msg << '\n';
  }
  return os.str();
}

}  // namespace accel
