#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "craft/errors.hpp"
#include "craft/world.hpp"

using namespace craft;
using namespace craft::world;

namespace {

Scene wipe_scene(double target_y = 0.0) {
  Scene s;
  s.task = TaskId::Wipe;
  s.target_y = target_y;
  return s;
}

Scene insert_scene(double target_y = 0.0) {
  Scene s;
  s.task = TaskId::Insert;
  s.target_y = target_y;
  return s;
}

TraceSample pressing(double x, double y, double fx) {
  TraceSample t;
  t.ee = Vec2(x, y);
  t.contact.f = Vec2(fx, 0.0);
  t.contact.in_contact = true;
  return t;
}

// Reference rasterizer for a single segment: each global cell is split into
// 8x8 sub-cells and the segment is walked at 8 samples per sub-cell width. A
// cell is lit when at least half a sub-cell of segment length lies inside it
// (closed cell).
std::set<int> reference_cells(const Vec2& a, const Vec2& b) {
  const double sub = kGlobalCell / 8.0;
  const int n = static_cast<int>(std::ceil((b - a).norm() / sub)) * 8;
  const double step = (b - a).norm() / n;
  std::set<int> lit;
  for (int row = 0; row < kGlobalSide; ++row)
    for (int col = 0; col < kGlobalSide; ++col) {
      const double x0 = -kGlobalExtent + col * kGlobalCell, y1 = kGlobalExtent - row * kGlobalCell;
      int inside = 0;
      for (int k = 0; k <= n; ++k) {
        const Vec2 p = a + (b - a) * (static_cast<double>(k) / n);
        const double sx = (p[0] - x0) / sub, sy = (y1 - p[1]) / sub;
        if (sx >= -1e-9 && sx <= 8 + 1e-9 && sy >= -1e-9 && sy <= 8 + 1e-9) ++inside;
      }
      if (inside * step >= 0.5 * sub) lit.insert(row * kGlobalSide + col);
    }
  return lit;
}

}  // namespace

TEST_CASE("contact force examples") {
  const Scene wall = wipe_scene();
  const auto clear = contact_force(wall, Vec2(0.5, 0.0), Vec2(0.3, 0.1));
  CHECK_FALSE(clear.in_contact);
  CHECK(clear.f == Vec2::Zero());

  const double d = 0.001;
  const auto light = contact_force(wall, Vec2(wall.wall_x - kEeRadius + d, 0.0), Vec2::Zero());
  CHECK(light.in_contact);
  CHECK(light.f[0] == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(light.f[1] == 0.0);
  CHECK(light.penetration == doctest::Approx(d));

  const auto deep = contact_force(wall, Vec2(wall.wall_x - kEeRadius + 1.0, 0.0), Vec2::Zero());
  CHECK(deep.f.norm() == doctest::Approx(100.0).epsilon(1e-12));

  // Moving into the wall adds damping, moving along it adds friction against the motion.
  const auto moving = contact_force(wall, Vec2(wall.wall_x - kEeRadius + d, 0.0), Vec2(0.05, 0.2));
  CHECK(moving.f[0] == doctest::Approx(-(2.0 + 20.0 * 0.05)));
  CHECK(moving.f[1] == doctest::Approx(-0.2 * 3.0));
}

TEST_CASE("slot opening lets the end effector through") {
  const Scene s = insert_scene(0.1);
  CHECK_FALSE(contact_force(s, Vec2(s.wall_x + 0.05, 0.1), Vec2::Zero()).in_contact);
  const auto side = contact_force(s, Vec2(s.wall_x + 0.05, 0.1 + 0.5 * s.slot_width - kEeRadius + 0.002), Vec2::Zero());
  CHECK(side.in_contact);
  CHECK(side.f[1] == doctest::Approx(-4.0));
  const auto bottom = contact_force(s, Vec2(s.wall_x + kSlotDepth - kEeRadius + 0.001, 0.1), Vec2::Zero());
  CHECK(bottom.f[0] == doctest::Approx(-2.0));
  CHECK(contact_force(s, Vec2(s.wall_x - kEeRadius + 0.001, -0.2), Vec2::Zero()).in_contact);
}

TEST_CASE("contact force is Lipschitz in position") {
  RngStream r(3, "lipschitz");
  const double L = 2.0 * kContactStiffness;
  int probes = 0;
  for (const Scene& s : {wipe_scene(0.05), insert_scene(-0.1)}) {
    for (int i = 0; i < 20000; ++i) {
      const Vec2 p(r.uniform(s.wall_x - 0.03, s.wall_x + kSlotDepth + 0.02), r.uniform(-0.25, 0.05));
      const auto f0 = contact_force(s, p, Vec2::Zero());
      if (f0.penetration >= kEeRadius || f0.f.norm() >= kForceLimit) continue;  // centre inside the solid
      const double ang = r.uniform(0, 2 * M_PI);
      const Vec2 delta = 1e-6 * Vec2(std::cos(ang), std::sin(ang));
      const auto f1 = contact_force(s, p + delta, Vec2::Zero());
      if (f1.penetration >= kEeRadius) continue;
      CHECK((f1.f - f0.f).norm() <= L * delta.norm() * (1 + 1e-6));
      ++probes;
    }
  }
  CHECK(probes > 10000);
}

TEST_CASE("scene sampler ranges, texture placement and determinism") {
  TaskSpec spec;
  RngStream root(11, "scenes");
  for (int i = 0; i < 1000; ++i) {
    RngStream a = root.derive(i), b = root.derive(i);
    const Scene s = sample_scene(spec, Regime::InDist, a);
    CHECK(s == sample_scene(spec, Regime::InDist, b));
    CHECK(std::abs(s.target_y) <= 0.3);
    REQUIRE(s.texture.size() == 40);
    std::set<int> cells;
    for (const auto& t : s.texture) {
      cells.insert(t.cell);
      const double cx = -kGlobalExtent + (t.cell % kGlobalSide + 0.5) * kGlobalCell;
      CHECK(cx < s.wall_x);
      CHECK(t.intensity >= 0.0);
      CHECK(t.intensity <= 1.0);
    }
    CHECK(cells.size() == 40);

    RngStream c = root.derive("object").derive(i);
    const Scene obj = sample_scene(spec, Regime::OODObject, c);
    CHECK(obj.texture.size() == 80);
    for (const auto& t : obj.texture) CHECK(t.intensity >= 0.5);

    RngStream d = root.derive("task").derive(i);
    const double y = std::abs(sample_scene(spec, Regime::OODTask, d).target_y);
    CHECK(y >= 0.35);
    CHECK(y <= 0.45);
  }
}

TEST_CASE("render of the stretched arm matches the reference rasterizer") {
  const Scene empty = insert_scene();
  const RenderOptions bare{false, false};
  const Raster r = render(empty, sim::ArmParams{}, Vec2(0, 0), nullptr, bare);
  const std::set<int> expected = reference_cells(Vec2(0, 0), Vec2(1, 0));
  CHECK(expected.size() == 14);
  for (int i = 0; i < kGlobalPixels; ++i) {
    CAPTURE(i);
    CHECK(r.global[i] == (expected.count(i) ? 1.0 : 0.0));
  }
  // Rows straddling y = 0, columns covering x in [0, 1].
  for (int i : expected) {
    CHECK((i / kGlobalSide == 7 || i / kGlobalSide == 8));
    CHECK(i % kGlobalSide >= 8);
    CHECK(i % kGlobalSide <= 14);
  }
}

TEST_CASE("render palette, noise and determinism") {
  TaskSpec spec;
  for (TaskId task : {TaskId::Insert, TaskId::Wipe}) {
    spec.task = task;
    RngStream rs(4, "palette");
    const Scene s = sample_scene(spec, Regime::InDist, rs);
    const Raster r = render(s, sim::ArmParams{}, Vec2(0.4, -1.3), nullptr, RenderOptions{false, true});
    std::set<double> values(r.global.begin(), r.global.end());
    values.insert(r.ego.begin(), r.ego.end());
    for (double v : values) CHECK((v == 0.0 || v == kWallValue || v == kTargetValue || v == kArmValue));
    CHECK(values.count(kTargetValue) == 1);

    CHECK(render(s, {}, Vec2(0.4, -1.3), nullptr) == render(s, {}, Vec2(0.4, -1.3), nullptr));
    RngStream n1(9, "noise"), n2(9, "noise");
    const Raster a = render(s, {}, Vec2(0.4, -1.3), &n1);
    CHECK(a == render(s, {}, Vec2(0.4, -1.3), &n2));
    for (double v : a.global) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    const auto bytes = quantize(a);
    const Raster back = dequantize(bytes);
    CHECK(quantize(back) == bytes);
    for (int i = 0; i < kGlobalPixels; ++i) CHECK(std::abs(back.global[i] - a.global[i]) <= 0.5 / 255 + 1e-12);
  }
  CHECK_THROWS_AS(dequantize(std::vector<std::uint8_t>(255)), ContractViolation);
}

TEST_CASE("wipe coverage threshold") {
  const Scene s = wipe_scene(0.1);
  const double x = s.wall_x - kEeRadius + 0.001;
  std::vector<TraceSample> trace;
  for (int c = 0; c < 17; ++c) trace.push_back(pressing(x, wipe_cell_y(s, c), -3.0));
  const auto r17 = judge(s, trace);
  CHECK(r17.wiped_cells == 17);
  CHECK(r17.coverage == doctest::Approx(0.85));
  CHECK_FALSE(r17.success);

  trace.push_back(pressing(x, wipe_cell_y(s, 17), -3.0));
  const auto r18 = judge(s, trace);
  CHECK(r18.coverage == doctest::Approx(0.90));
  CHECK(r18.success);

  // Out-of-band forces do not count.
  std::vector<TraceSample> weak{pressing(x, wipe_cell_y(s, 0), -0.4), pressing(x, wipe_cell_y(s, 1), -25.0)};
  CHECK(judge(s, weak).wiped_cells == 0);
}

TEST_CASE("insert depth threshold") {
  const Scene s = insert_scene(0.1);
  TraceSample deep;
  deep.ee = Vec2(s.wall_x + 0.05, 0.1);
  CHECK(judge(s, std::span(&deep, 1)).success);
  TraceSample shallow;
  shallow.ee = Vec2(s.wall_x + 0.049, 0.1);
  CHECK_FALSE(judge(s, std::span(&shallow, 1)).success);
  TraceSample off;
  off.ee = Vec2(s.wall_x + 0.08, 0.1 + 0.021);
  CHECK(judge(s, std::span(&off, 1)).insert_depth == 0.0);

  CHECK_THROWS_AS(judge(s, std::span<const TraceSample>()), JudgementError);
}

TEST_CASE("success is monotone in the trace") {
  RngStream r(21, "monotone");
  const Scene ins = insert_scene(0.0);
  TraceSample hit;
  hit.ee = Vec2(ins.wall_x + 0.06, 0.0);
  std::vector<TraceSample> trace{hit};
  for (int i = 0; i < 200; ++i) {
    TraceSample t;
    t.ee = Vec2(r.uniform(0.2, 0.7), r.uniform(-0.4, 0.4));
    trace.push_back(t);
    REQUIRE(judge(ins, trace).success);
  }

  const Scene w = wipe_scene();
  std::vector<TraceSample> wt;
  for (int c = 0; c < kWipeCells; ++c) wt.push_back(pressing(0.59, wipe_cell_y(w, c), -3.0));
  for (int i = 0; i < 200; ++i) {
    wt.push_back(pressing(0.59, r.uniform(-0.5, 0.5), r.uniform(-40, 0)));
    REQUIRE(judge(w, wt).success);
  }
}
