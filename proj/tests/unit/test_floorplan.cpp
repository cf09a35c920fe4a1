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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "accel/floorplan.hpp"

namespace accel {
namespace {

const PlacedRect& find(const std::vector<PlacedRect>& v, const std::string& path) {
  auto it = std::find_if(v.begin(), v.end(), [&](const PlacedRect& p) { return p.path == path; });
  if (it == v.end()) throw std::runtime_error("missing " + path);
  return *it;
}

std::array<int, 4> mul(const std::array<int, 4>& a, const std::array<int, 4>& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
          a[2] * b[1] + a[3] * b[3]};
}

TEST(Floorplan, GroupAxioms) {
  for (Orient a : kAllOrients) {
    EXPECT_EQ(compose(Orient::kR0, a), a);
    EXPECT_EQ(compose(a, Orient::kR0), a);
    EXPECT_EQ(compose(a, inverse(a)), Orient::kR0);
    EXPECT_EQ(orient_from_string(to_string(a)), a);
    for (Orient b : kAllOrients) {
      EXPECT_EQ(orient_matrix(compose(a, b)), mul(orient_matrix(a), orient_matrix(b)));
      for (Orient c : kAllOrients) EXPECT_EQ(compose(compose(a, b), c), compose(a, compose(b, c)));
    }
  }
}

TEST(Floorplan, RotationSwapsDims) {
  FpNode top = make_hierarchy("top");
  add_child(top, make_macro("m", 10, 20, Orient::kR90), 0, 0);
  const auto& r = find(flatten(top), "top/m").rect;
  EXPECT_EQ(r.width(), um_to_nm(20));
  EXPECT_EQ(r.height(), um_to_nm(10));
}

TEST(Floorplan, MirrorTwiceIsIdentity) {
  EXPECT_EQ(compose(Orient::kMX, Orient::kMX), Orient::kR0);
  FpNode a = make_hierarchy("top"), b = make_hierarchy("top");
  FpNode inner = make_hierarchy("h", Orient::kMX);
  add_child(inner, make_macro("m", 4, 6, Orient::kMX), 1, 2);
  add_child(a, inner, 3, 3);
  FpNode plain = make_hierarchy("h");
  add_child(plain, make_macro("m", 4, 6), 1, 2);
  add_child(b, plain, 3, 3);
  EXPECT_EQ(find(flatten(a), "top/h/m").orientation, Orient::kR0);
  EXPECT_EQ(find(flatten(a), "top/h/m").rect.width(), find(flatten(b), "top/h/m").rect.width());
}

TEST(Floorplan, NestedOffsetsAdd) {
  FpNode top = make_hierarchy("top");
  FpNode mid = make_hierarchy("mid");
  add_child(mid, make_macro("m", 1, 1), 0, 7);
  add_child(top, mid, 5, 0);
  const auto& r = find(flatten(top), "top/mid/m").rect;
  EXPECT_EQ(r.x0, um_to_nm(5));
  EXPECT_EQ(r.y0, um_to_nm(7));
}

TEST(Floorplan, ArrayNaming) {
  const FpNode a = array(make_macro("mac", 4, 4), 2, 3, 5, 5, "mac_{r}_{c}");
  ASSERT_EQ(a.children.size(), 6u);
  std::vector<std::string> names;
  for (const auto& c : a.children) names.push_back(c.node.name);
  std::sort(names.begin(), names.end());
  EXPECT_EQ(std::unique(names.begin(), names.end()), names.end());
  EXPECT_THROW(array(make_macro("mac", 4, 4), 2, 2, 5, 5, "mac_{r}"), FloorplanError);
}

TEST(Floorplan, SingleArrayEqualsProto) {
  const FpNode a = array(make_macro("mac", 4, 6), 1, 1, 10, 10, "m{i}");
  ASSERT_EQ(a.children.size(), 1u);
  EXPECT_EQ(a.children[0].x, 0);
  EXPECT_EQ(a.children[0].y, 0);
  EXPECT_EQ(extent(a), extent(make_macro("mac", 4, 6)));
}

TEST(Floorplan, TightPitchOverlaps) {
  FpNode top = make_hierarchy("top");
  add_child(top, array(make_macro("mac", 4, 4), 1, 2, 3, 5, "m{c}"), 0, 0);
  const auto v = check(top, 0);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::kOverlap);
}

TEST(Floorplan, OverlapNamesBoth) {
  FpNode top = make_hierarchy("top");
  add_child(top, make_macro("a", 10, 10), 0, 0);
  add_child(top, make_macro("b", 10, 10), 5, 5);
  const auto v = check(top, 0);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (Violation{ViolationKind::kOverlap, "top/a", "top/b", ""}));
}

TEST(Floorplan, SpacingViolation) {
  FpNode top = make_hierarchy("top");
  add_child(top, make_macro("a", 10, 10), 0, 0);
  add_child(top, make_macro("b", 10, 10), 10.5, 0);
  const auto v = check(top, 1);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (Violation{ViolationKind::kSpacing, "top/a", "top/b", ""}));
  EXPECT_TRUE(check(top, 0.5).empty());
}

TEST(Floorplan, CleanGrid) {
  FpNode top = make_hierarchy("top");
  add_child(top, array(make_macro("mac", 4, 4), 4, 4, 6, 6, "m_{r}_{c}"), 0, 0);
  EXPECT_TRUE(check(top, 2).empty());
}

TEST(Floorplan, DuplicateAndBounds) {
  FpNode top = make_hierarchy("top");
  top.bound = Rect{0, 0, um_to_nm(20), um_to_nm(20)};
  add_child(top, make_macro("a", 5, 5), 0, 0);
  add_child(top, make_macro("a", 5, 5), 8, 0);
  add_child(top, make_macro("c", 5, 5), 18, 0);
  const auto v = check(top, 0);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].kind, ViolationKind::kDuplicateName);
  EXPECT_EQ(v[1].kind, ViolationKind::kOutOfBounds);
  EXPECT_EQ(v[1].a, "top/c");
}

TEST(Floorplan, CheckIgnoresConstructionOrder) {
  std::mt19937_64 rng(4);
  std::vector<std::tuple<std::string, double, double>> items;
  for (int i = 0; i < 12; ++i)
    items.emplace_back("m" + std::to_string(i), double(rng() % 40), double(rng() % 40));
  auto build = [&] {
    FpNode top = make_hierarchy("top");
    for (const auto& [n, x, y] : items) add_child(top, make_macro(n, 6, 6), x, y);
    return check(top, 1.5);
  };
  const auto ref = build();
  for (int k = 0; k < 5; ++k) {
    std::shuffle(items.begin(), items.end(), rng);
    EXPECT_EQ(build(), ref);
  }
}

TEST(Floorplan, AreaIsOrientationInvariant) {
  auto area = [](Orient o) {
    FpNode top = make_hierarchy("top");
    add_child(top, make_macro("a", 7, 3, o), 0, 0);
    add_child(top, make_macro("b", 2.5, 9, o), 20, 20);
    double s = 0;
    for (const auto& p : flatten(top))
      if (p.macro) s += double(p.rect.width()) * double(p.rect.height());
    return s;
  };
  for (Orient o : kAllOrients) EXPECT_EQ(area(o), area(Orient::kR0));
}

TEST(Floorplan, PipeStages) {
  EXPECT_EQ(pipe_stages({0, 0}, {3000, 0}, 1000), 3);
  EXPECT_EQ(pipe_stages({5, 5}, {5, 5}, 1000), 0);
  EXPECT_EQ(pipe_stages({0, 0}, {1000, 2000}, 1500), 2);
  EXPECT_THROW(pipe_stages({0, 0}, {1, 1}, 0), FloorplanError);
}

TEST(Floorplan, BufferTreeDepth) {
  EXPECT_EQ(buffer_tree_depth({0, 0}, {{0, 0}}, 1000, 4), 0);
  std::vector<Point> near(16, Point{10, 10});
  EXPECT_EQ(buffer_tree_depth({0, 0}, near, 1000, 4), 2);
  std::vector<Point> far = near;
  far.back() = Point{5000, 0};
  EXPECT_EQ(buffer_tree_depth({0, 0}, far, 1000, 4), 5);
  EXPECT_THROW(buffer_tree_depth({0, 0}, {}, 1000, 4), FloorplanError);
}

TEST(Floorplan, LoadFromJson) {
  const TechTable tech = load_tech(R"({"sram":{"width":10,"height":20},"mac":{"width":2,"height":2}})");
  const FpNode root = load_floorplan(R"({"name":"top","kind":"hierarchy","bound":[0,0,100,100],
    "children":[{"name":"s","kind":"macro","macro":"sram","orientation":"R90","x":1,"y":1},
                {"name":"g","kind":"array","rows":2,"cols":2,"pitch_x":3,"pitch_y":3,
                 "pattern":"m{i}","proto":{"name":"m","kind":"macro","macro":"mac"},"x":50,"y":50}]})",
                                     tech);
  const auto flat = flatten(root);
  EXPECT_EQ(find(flat, "top/s").rect.width(), um_to_nm(20));
  EXPECT_EQ(std::count_if(flat.begin(), flat.end(), [](const PlacedRect& p) { return p.macro; }), 5);
  EXPECT_TRUE(check(root, 0.5).empty());
  EXPECT_THROW(load_floorplan(R"({"name":"t","kind":"macro","macro":"nope"})", tech), FloorplanError);
  EXPECT_THROW(load_floorplan(R"({"name":"t","kind":"hierarchy","colour":1})", tech), FloorplanError);
}

TEST(Floorplan, SvgHighlightsViolations) {
  FpNode top = make_hierarchy("top");
  add_child(top, make_macro("a", 10, 10), 0, 0);
  add_child(top, make_macro("b", 10, 10), 5, 5);
  const std::string clean = render_svg(top);
  const std::string flagged = render_svg(top, check(top, 0));
  EXPECT_EQ(clean.rfind("<svg", 0), 0u);
  EXPECT_EQ(render_svg(top), clean);
  EXPECT_NE(clean, flagged);
  EXPECT_EQ(violations_csv({}), "kind,a,b,message\n");
}

}  // namespace
}  // namespace accel
