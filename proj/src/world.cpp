#include "craft/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "craft/errors.hpp"

namespace craft::world {
namespace {

inline constexpr int kTextureCells = 40;
inline constexpr int kOodTextureCells = 80;

struct Box {
  double x0, x1, y0, y1;
};

inline constexpr double kFar = 1e3;

// Solid regions of the fixture as axis-aligned boxes.
int fixture_boxes(const Scene& s, std::array<Box, 3>& out) {
  if (s.task == TaskId::Wipe) {
    out[0] = {s.wall_x, kFar, -kFar, kFar};
    return 1;
  }
  const double half = 0.5 * s.slot_width;
  out[0] = {s.wall_x, kFar, s.target_y + half, kFar};
  out[1] = {s.wall_x, kFar, -kFar, s.target_y - half};
  out[2] = {s.wall_x + kSlotDepth, kFar, s.target_y - half, s.target_y + half};
  return 3;
}

// Solid corners are rounded with this radius, which keeps the force gradient
// bounded by 2 k_c around the slot mouth.
inline constexpr double kCornerRadius = 0.5 * kEeRadius;

// Penetration of the end-effector disk into a box with rounded corners and the
// outward unit normal.
bool box_penetration(const Box& b, const Vec2& p, double& pen, Vec2& normal) {
  const double rc = kCornerRadius;
  const Box core{b.x0 + rc, b.x1 - rc, b.y0 + rc, b.y1 - rc};
  const Vec2 closest(std::clamp(p[0], core.x0, core.x1), std::clamp(p[1], core.y0, core.y1));
  const Vec2 diff = p - closest;
  const double dist = diff.norm();
  if (dist > 0.0) {
    pen = kEeRadius + rc - dist;
    normal = diff / dist;
    return pen > 0.0;
  }
  // Centre deep inside the solid: push out through the nearest face.
  const std::array<double, 4> depth{p[0] - b.x0, b.x1 - p[0], p[1] - b.y0, b.y1 - p[1]};
  const auto k = std::distance(depth.begin(), std::min_element(depth.begin(), depth.end()));
  static const std::array<Vec2, 4> normals{Vec2(-1, 0), Vec2(1, 0), Vec2(0, -1), Vec2(0, 1)};
  pen = kEeRadius + depth[k];
  normal = normals[k];
  return true;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

int global_col(double x) { return static_cast<int>(std::floor((x + kGlobalExtent) / kGlobalCell)); }
int global_row(double y) { return static_cast<int>(std::floor((kGlobalExtent - y) / kGlobalCell)); }
double global_center_x(int col) { return -kGlobalExtent + (col + 0.5) * kGlobalCell; }
double global_center_y(int row) { return kGlobalExtent - (row + 0.5) * kGlobalCell; }

bool background_cell(const Scene& s, int cell) { return global_center_x(cell % kGlobalSide) < s.wall_x; }

// Fixture palette at a world point, used for the ego view.
double fixture_value(const Scene& s, const Vec2& p) {
  if (p[0] < s.wall_x) return 0.0;
  if (s.task == TaskId::Wipe) {
    const bool on_segment = p[0] < s.wall_x + kEgoCell && std::abs(p[1] - s.target_y) <= 0.5 * s.segment_len;
    return on_segment ? kTargetValue : kWallValue;
  }
  const bool in_slot = p[0] < s.wall_x + kSlotDepth && std::abs(p[1] - s.target_y) < 0.5 * s.slot_width;
  return in_slot ? kTargetValue : kWallValue;
}

// Lights every cell that contains one of the 32 link-midpoint samples (closed cells).
template <typename CellOf>
void draw_link(const Vec2& a, const Vec2& b, CellOf&& light) {
  constexpr int kSamples = 32;
  for (int k = 0; k < kSamples; ++k) light(a + (b - a) * ((k + 0.5) / kSamples));
}

void add_noise(std::span<double> px, RngStream& rng) {
  for (double& v : px) v = std::clamp(v + kPixelNoise * rng.normal(), 0.0, 1.0);
}

}  // namespace

std::string_view to_string(TaskId task) { return task == TaskId::Insert ? "insert" : "wipe"; }

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::InDist: return "in_dist";
    case Regime::OODObject: return "ood_object";
    case Regime::OODTask: return "ood_task";
  }
  return "?";
}

TaskId parse_task(std::string_view name) {
  if (name == "insert") return TaskId::Insert;
  if (name == "wipe") return TaskId::Wipe;
  throw ContractViolation("unknown task '" + std::string(name) + "'");
}

Regime parse_regime(std::string_view name) {
  if (name == "in_dist" || name == "none") return Regime::InDist;
  if (name == "object" || name == "ood_object") return Regime::OODObject;
  if (name == "task" || name == "ood_task") return Regime::OODTask;
  throw ContractViolation("unknown regime '" + std::string(name) + "'");
}

void TaskSpec::validate() const {
  if (episode_len <= 0) throw ContractViolation("episode_len must be positive");
}

std::array<std::uint8_t, kVisionPixels> quantize(const Raster& r) {
  std::array<std::uint8_t, kVisionPixels> out{};
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  for (int i = 0; i < kGlobalPixels; ++i) out[i] = q(r.global[i]);
  for (int i = 0; i < kEgoPixels; ++i) out[kGlobalPixels + i] = q(r.ego[i]);
  return out;
}

Raster dequantize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kVisionPixels) throw ContractViolation("vision payload must hold 320 bytes");
  Raster r;
  for (int i = 0; i < kGlobalPixels; ++i) r.global[i] = bytes[i] / 255.0;
  for (int i = 0; i < kEgoPixels; ++i) r.ego[i] = bytes[kGlobalPixels + i] / 255.0;
  return r;
}

Scene sample_scene(const TaskSpec& spec, Regime regime, RngStream& rng) {
  spec.validate();
  Scene s;
  s.task = spec.task;
  s.wall_x = spec.wall_x;
  s.episode_seed = rng.key();

  if (regime == Regime::OODTask) {
    const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    s.target_y = side * rng.uniform(0.35, 0.45);
  } else {
    s.target_y = rng.uniform(-0.3, 0.3);
  }

  std::vector<int> cells;
  for (int c = 0; c < kGlobalPixels; ++c)
    if (background_cell(s, c)) cells.push_back(c);
  const int n_tex = regime == Regime::OODObject ? kOodTextureCells : kTextureCells;
  const double lo = regime == Regime::OODObject ? 0.5 : 0.0;
  for (int k = 0; k < n_tex; ++k) {
    const auto j = k + static_cast<int>(rng.below(cells.size() - k));
    std::swap(cells[k], cells[j]);
    s.texture.push_back({cells[k], rng.uniform(lo, 1.0)});
  }
  return s;
}

ContactForce contact_force(const Scene& scene, const Vec2& ee_pos, const Vec2& ee_vel) {
  std::array<Box, 3> boxes{};
  const int n = fixture_boxes(scene, boxes);
  ContactForce out;
  for (int i = 0; i < n; ++i) {
    double pen = 0.0;
    Vec2 normal;
    if (!box_penetration(boxes[i], ee_pos, pen, normal)) continue;
    const double fn = kContactStiffness * pen + kContactDamping * std::max(-ee_vel.dot(normal), 0.0);
    const Vec2 tangent(-normal[1], normal[0]);
    out.f += fn * normal - kFrictionCoeff * fn * sign(ee_vel.dot(tangent)) * tangent;
    out.penetration = std::max(out.penetration, pen);
    out.in_contact = true;
  }
  const double mag = out.f.norm();
  if (mag > kForceLimit) out.f *= kForceLimit / mag;
  return out;
}

Raster render(const Scene& scene, const sim::ArmParams& arm, const Vec2& q, RngStream* noise,
              const RenderOptions& opts) {
  Raster r;
  if (opts.texture)
    for (const auto& t : scene.texture) r.global[t.cell] = t.intensity;

  if (opts.fixture) {
    const int wall_col = global_col(scene.wall_x + 0.5 * kGlobalCell);
    for (int row = 0; row < kGlobalSide; ++row)
      for (int col = 0; col < kGlobalSide; ++col)
        if (global_center_x(col) >= scene.wall_x) r.global[row * kGlobalSide + col] = kWallValue;
    if (scene.task == TaskId::Insert) {
      const int row = std::clamp(global_row(scene.target_y), 0, kGlobalSide - 1);
      r.global[row * kGlobalSide + wall_col] = kTargetValue;
    } else {
      const double y_lo = scene.target_y - 0.5 * scene.segment_len;
      const double y_hi = scene.target_y + 0.5 * scene.segment_len;
      for (int row = 0; row < kGlobalSide; ++row) {
        const double cy = global_center_y(row);
        if (cy + 0.5 * kGlobalCell > y_lo && cy - 0.5 * kGlobalCell < y_hi)
          r.global[row * kGlobalSide + wall_col] = kTargetValue;
      }
    }
  }

  const Vec2 elbow(arm.l1 * std::cos(q[0]), arm.l1 * std::sin(q[0]));
  const Vec2 ee = sim::forward_kinematics(arm, q);
  constexpr double kSlack = 1e-9;

  auto light_global = [&](const Vec2& p) {
    for (int row = 0; row < kGlobalSide; ++row) {
      if (std::abs(p[1] - global_center_y(row)) > 0.5 * kGlobalCell + kSlack) continue;
      for (int col = 0; col < kGlobalSide; ++col)
        if (std::abs(p[0] - global_center_x(col)) <= 0.5 * kGlobalCell + kSlack)
          r.global[row * kGlobalSide + col] = kArmValue;
    }
  };
  draw_link(Vec2::Zero(), elbow, light_global);
  draw_link(elbow, ee, light_global);

  // Ego crop: same palette, sampled at cell centres, no texture.
  const double half = 0.5 * kEgoSide * kEgoCell;
  auto ego_center = [&](int row, int col) {
    return Vec2(ee[0] - half + (col + 0.5) * kEgoCell, ee[1] + half - (row + 0.5) * kEgoCell);
  };
  if (opts.fixture)
    for (int row = 0; row < kEgoSide; ++row)
      for (int col = 0; col < kEgoSide; ++col) r.ego[row * kEgoSide + col] = fixture_value(scene, ego_center(row, col));
  auto light_ego = [&](const Vec2& p) {
    for (int row = 0; row < kEgoSide; ++row)
      for (int col = 0; col < kEgoSide; ++col) {
        const Vec2 c = ego_center(row, col);
        if (std::abs(p[0] - c[0]) <= 0.5 * kEgoCell + kSlack && std::abs(p[1] - c[1]) <= 0.5 * kEgoCell + kSlack)
          r.ego[row * kEgoSide + col] = kArmValue;
      }
  };
  draw_link(Vec2::Zero(), elbow, light_ego);
  draw_link(elbow, ee, light_ego);

  if (noise != nullptr) {
    add_noise(r.global, *noise);
    add_noise(r.ego, *noise);
  }
  return r;
}

double wipe_cell_y(const Scene& scene, int cell) {
  const double width = scene.segment_len / kWipeCells;
  return scene.target_y - 0.5 * scene.segment_len + (cell + 0.5) * width;
}

SuccessReport judge(const Scene& scene, std::span<const TraceSample> trace) {
  if (trace.empty()) throw JudgementError("cannot judge an empty trace");
  SuccessReport rep;
  if (scene.task == TaskId::Insert) {
    for (const auto& s : trace)
      if (std::abs(s.ee[1] - scene.target_y) <= kInsertAlignTol)
        rep.insert_depth = std::max(rep.insert_depth, s.ee[0] - scene.wall_x);
    rep.success = rep.insert_depth >= kInsertSuccessDepth;
    return rep;
  }
  const double half_width = 0.5 * scene.segment_len / kWipeCells;
  std::array<bool, kWipeCells> wiped{};
  for (const auto& s : trace) {
    const double fx = std::abs(s.contact.f[0]);
    if (!s.contact.in_contact || fx < kWipeForceMin || fx > kWipeForceMax) continue;
    for (int c = 0; c < kWipeCells; ++c)
      if (std::abs(s.ee[1] - wipe_cell_y(scene, c)) <= half_width) wiped[c] = true;
  }
  rep.wiped_cells = static_cast<int>(std::count(wiped.begin(), wiped.end(), true));
  rep.coverage = static_cast<double>(rep.wiped_cells) / kWipeCells;
  rep.success = rep.wiped_cells * 10 >= kWipeCells * 9;
  return rep;
}

}  // namespace craft::world
