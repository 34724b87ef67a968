#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "craft/rng.hpp"
#include "craft/sim.hpp"

namespace craft::world {

using sim::Vec2;

enum class TaskId : std::uint8_t { Insert = 0, Wipe = 1 };
enum class Regime { InDist, OODObject, OODTask };

std::string_view to_string(TaskId task);
std::string_view to_string(Regime regime);
TaskId parse_task(std::string_view name);  // throws ContractViolation
Regime parse_regime(std::string_view name);

inline constexpr double kEeRadius = 0.02;
inline constexpr double kContactStiffness = 2000.0;
inline constexpr double kContactDamping = 20.0;
inline constexpr double kFrictionCoeff = 0.2;
inline constexpr double kForceLimit = 100.0;
inline constexpr double kSlotDepth = 0.10;

inline constexpr int kGlobalSide = 16;
inline constexpr int kEgoSide = 8;
inline constexpr int kGlobalPixels = kGlobalSide * kGlobalSide;
inline constexpr int kEgoPixels = kEgoSide * kEgoSide;
inline constexpr int kVisionPixels = kGlobalPixels + kEgoPixels;
inline constexpr double kGlobalExtent = 1.2;  // view covers [-1.2, 1.2]^2
inline constexpr double kGlobalCell = 2.0 * kGlobalExtent / kGlobalSide;
inline constexpr double kEgoCell = 0.05;
inline constexpr double kPixelNoise = 0.01;

inline constexpr double kWallValue = 0.5;
inline constexpr double kTargetValue = 0.8;
inline constexpr double kArmValue = 1.0;

inline constexpr double kInsertAlignTol = 0.02;
inline constexpr double kInsertSuccessDepth = 0.05;
inline constexpr int kWipeCells = 20;
inline constexpr double kWipeForceMin = 0.5;
inline constexpr double kWipeForceMax = 20.0;

struct TaskSpec {
  TaskId task = TaskId::Insert;
  int episode_len = 600;  // control ticks
  double wall_x = 0.6;

  void validate() const;
};

struct TextureCell {
  int cell = 0;  // row-major index into the global view
  double intensity = 0.0;

  bool operator==(const TextureCell&) const = default;
};

/// Immutable task instance. `target_y` is the slot center (Insert) or the
/// midpoint of the wiping segment (Wipe).
struct Scene {
  TaskId task = TaskId::Insert;
  double wall_x = 0.6;
  double target_y = 0.0;
  double slot_width = 0.06;
  double segment_len = 0.4;
  std::vector<TextureCell> texture;
  std::uint64_t episode_seed = 0;

  bool operator==(const Scene&) const = default;
};

struct ContactForce {
  Vec2 f = Vec2::Zero();  // force acting on the end effector (N)
  double penetration = 0.0;
  bool in_contact = false;
};

/// Global third-person view then an end-effector-centred crop; row 0 is the top
/// (largest y), columns run along +x.
struct Raster {
  std::array<double, kGlobalPixels> global{};
  std::array<double, kEgoPixels> ego{};

  bool operator==(const Raster&) const = default;
};

std::array<std::uint8_t, kVisionPixels> quantize(const Raster& r);
Raster dequantize(std::span<const std::uint8_t> bytes);

struct RenderOptions {
  bool texture = true;
  bool fixture = true;  // wall, slot and segment
};

struct SuccessReport {
  bool success = false;
  double insert_depth = 0.0;
  double coverage = 0.0;
  int wiped_cells = 0;
};

// Per-tick information the judge needs.
struct TraceSample {
  Vec2 ee = Vec2::Zero();
  ContactForce contact;
};

Scene sample_scene(const TaskSpec& spec, Regime regime, RngStream& rng);

ContactForce contact_force(const Scene& scene, const Vec2& ee_pos, const Vec2& ee_vel);

/// Pass `noise == nullptr` for a noise-free render.
Raster render(const Scene& scene, const sim::ArmParams& arm, const Vec2& q, RngStream* noise,
              const RenderOptions& opts = {});

SuccessReport judge(const Scene& scene, std::span<const TraceSample> trace);

// Wipe cell centres along the segment, bottom to top.
double wipe_cell_y(const Scene& scene, int cell);

}  // namespace craft::world
