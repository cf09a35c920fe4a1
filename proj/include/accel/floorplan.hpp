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
 * \file floorplan.hpp
 * \brief Hierarchical floorplans: construction, flattening, rule checks,
 *  rendering and wire pipe-stage estimates.
 *
 * Geometry is held in integer nanometres. Functions taking or returning
 * doubles use micrometres.
 *
 * A node occupies the box [0, W] x [0, H] of its own frame. W and H are the
 * macro dimensions, the bound's upper corner when a bound is declared, or the
 * largest child extent otherwise. A child placed at (x, y) with orientation o
 * has its box transformed by o and then shifted so that the lower left corner
 * of the result lands on (x, y).
 */
#ifndef ACCEL_FLOORPLAN_HPP_
#define ACCEL_FLOORPLAN_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "accel/common.hpp"

namespace accel {

using Nm = std::int64_t;

Nm um_to_nm(double um);
inline double nm_to_um(Nm nm) { return static_cast<double>(nm) / 1000.0; }

/*! \brief The eight placement orientations (dihedral group of the square). */
enum class Orient : std::uint8_t { kR0, kR90, kR180, kR270, kMX, kMY, kMX90, kMY90 };

inline constexpr std::array<Orient, 8> kAllOrients = {Orient::kR0,  Orient::kR90, Orient::kR180,
                                                      Orient::kR270, Orient::kMX,  Orient::kMY,
                                                      Orient::kMX90, Orient::kMY90};

std::string_view to_string(Orient o);
Orient orient_from_string(std::string_view s);

/*! \brief 2x2 integer matrix of an orientation, row major. MX maps (x, y) to (x, -y). */
std::array<int, 4> orient_matrix(Orient o);
/*! \brief a after b: apply b first. */
Orient compose(Orient a, Orient b);
Orient inverse(Orient o);

struct Rect {
  Nm x0 = 0;
  Nm y0 = 0;
  Nm x1 = 0;
  Nm y1 = 0;
  Nm width() const { return x1 - x0; }
  Nm height() const { return y1 - y0; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

enum class FpKind : std::uint8_t { kHierarchy, kMacro };

struct FpChild;

struct FpNode {
  std::string name;
  FpKind kind = FpKind::kHierarchy;
  std::string macro;  // tech table entry, macros only
  Nm width = 0;       // macros only
  Nm height = 0;
  Orient orientation = Orient::kR0;
  std::vector<FpChild> children;
  std::optional<Rect> bound;  // in the node's own frame
};

struct FpChild {
  FpNode node;
  Nm x = 0;
  Nm y = 0;
};

/*! \brief Macro dimensions in micrometres by macro name. */
struct TechTable {
  std::map<std::string, std::pair<double, double>> macros;
};

TechTable load_tech(std::string_view json_text);

FpNode make_macro(const std::string& name, double width_um, double height_um,
                  Orient orientation = Orient::kR0);
FpNode make_hierarchy(const std::string& name, Orient orientation = Orient::kR0);
/*! \brief Throws FloorplanError on a non-macro parent or a bad name. */
void add_child(FpNode& parent, FpNode child, double x_um, double y_um);

/*! \brief Extent (W, H) of a node's own frame. */
std::pair<Nm, Nm> extent(const FpNode& node);

/*!
 * \brief rows x cols copies of proto at the given pitch. The pattern may use
 *  {r}, {c} and {i}. Throws FloorplanError when two instances get one name.
 */
FpNode array(const FpNode& proto, int rows, int cols, double pitch_x_um, double pitch_y_um,
             const std::string& name_pattern, const std::string& name = "array");

struct PlacedRect {
  std::string path;  // hierarchical name joined by '/'
  Rect rect;         // absolute, nm
  Orient orientation = Orient::kR0;  // absolute
  bool macro = false;
  int depth = 0;
};

/*! \brief Every node, root first, in depth-first order. */
std::vector<PlacedRect> flatten(const FpNode& root);

enum class ViolationKind : std::uint8_t { kOverlap, kSpacing, kDuplicateName, kOutOfBounds };
std::string_view to_string(ViolationKind k);

struct Violation {
  ViolationKind kind = ViolationKind::kOverlap;
  std::string a;
  std::string b;  // empty for single-object violations
  std::string message;
  friend bool operator==(const Violation& x, const Violation& y) {
    return x.kind == y.kind && x.a == y.a && x.b == y.b;
  }
};

/*!
 * \brief Overlap and spacing between macro leaves, duplicate hierarchical
 *  names and children outside a declared bound. Sorted by (kind, a, b).
 */
std::vector<Violation> check(const FpNode& root, double min_spacing_um);

struct Point {
  double x = 0;  // micrometres
  double y = 0;
};

/*! \brief ceil(manhattan(a, b) / reach). Throws FloorplanError for reach <= 0. */
std::int64_t pipe_stages(Point a, Point b, double reach_um_per_cycle);

/*!
 * \brief Estimate of the depth of a buffer tree from source to sinks:
 *  max(largest pipe_stages, ceil(log_fanout(sinks))).
 */
std::int64_t buffer_tree_depth(Point source, const std::vector<Point>& sinks, double reach_um,
                               int max_fanout);

/*! \brief Deterministic SVG; objects named in violations are outlined in red. */
std::string render_svg(const FpNode& root, const std::vector<Violation>& violations = {});

/*!
 * \brief JSON tree. Each node has name, kind ("hierarchy", "macro" or
 *  "array"), optional orientation and bound [x0, y0, x1, y1]; children carry
 *  x and y. Macros name a tech entry. Arrays give rows, cols, pitch_x,
 *  pitch_y, pattern and proto.
 */
FpNode load_floorplan(std::string_view json_text, const TechTable& tech);

std::string violations_csv(const std::vector<Violation>& v);

}  // namespace accel

#endif  // ACCEL_FLOORPLAN_HPP_
