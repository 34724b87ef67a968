#include "craft/expert.hpp"

#include <algorithm>
#include <cmath>

namespace craft::expert {
namespace {

constexpr double kStep = kSweepSpeed * sim::kControlDt;  // set-point travel per tick
constexpr double kArrivalTol = 0.01;

double approach(double from, double to, double max_step) { return from + std::clamp(to - from, -max_step, max_step); }

void insert_tick(const world::Scene& scene, const Vec2& ee, double fx, ExpertMemory& m) {
  const double wall = scene.wall_x;
  const bool aligned = std::abs(ee[1] - scene.target_y) < 0.5 * scene.slot_width;
  switch (m.phase) {
    case Phase::Approach:
      m.p_d = {wall - kApproachStandoff, scene.target_y + m.offset};
      if ((ee - m.p_d).norm() < kArrivalTol) m.phase = Phase::Advance;
      break;
    case Phase::Advance:
      if (aligned && ee[0] > wall + 0.005) {
        m.phase = Phase::Push;
      } else if (fx >= kInsertContactForce) {
        m.phase = Phase::Slide;
      } else {
        m.p_d[0] = std::min(m.p_d[0] + kStep, wall + kInsertAdvanceReach);
      }
      break;
    case Phase::Slide:
      m.gap_ticks = fx < kInsertGapForce ? m.gap_ticks + 1 : 0;
      if (m.gap_ticks >= kGapDebounceTicks) {
        m.phase = Phase::Push;
      } else {
        m.p_d[1] = approach(m.p_d[1], scene.target_y, kStep);
      }
      break;
    case Phase::Push:
      // Jammed against the face next to the slot: back off and keep sliding.
      if (!aligned && ee[0] < wall && fx >= kInsertJamForce) {
        m.phase = Phase::Slide;
        m.gap_ticks = 0;
        m.p_d[0] = ee[0] + kInsertRepress;
      }
      break;
    default:
      break;
  }
  if (m.phase == Phase::Push) {
    m.p_d[0] = approach(m.p_d[0], wall + kInsertPushDepth, kStep);
    m.p_d[1] = approach(m.p_d[1], scene.target_y, kStep);
  }
}

void wipe_tick(const world::Scene& scene, const Vec2& ee, double fx, ExpertMemory& m) {
  const double y_start = scene.target_y - 0.5 * scene.segment_len - 0.01;
  const double y_end = scene.target_y + 0.5 * scene.segment_len + 0.01;
  if (m.phase == Phase::Approach) {
    if (!m.started) {
      m.p_d = ee;
      m.started = true;
    }
    const Vec2 goal{scene.wall_x - kWipeStandoff, y_start};
    const Vec2 delta = goal - m.p_d;
    const double max_step = kWipeTransitSpeed * sim::kControlDt;
    m.p_d = delta.norm() <= max_step ? goal : Vec2(m.p_d + delta * (max_step / delta.norm()));
    if (m.p_d == goal && (ee - goal).norm() < kArrivalTol) m.phase = Phase::Press;
    return;
  }
  m.p_d[0] += kWipePressGain * (kWipeForceTarget - fx);
  if (fx >= world::kWipeForceMin) m.traversing = true;
  if (m.traversing) {
    m.p_d[1] = approach(m.p_d[1], y_end, kStep);
    if (m.p_d[1] >= y_end) m.phase = Phase::Done;
  }
}

}  // namespace

ExpertMemory initial_memory(const world::Scene& scene, RngStream& rng) {
  ExpertMemory m;
  if (scene.task == world::TaskId::Insert) m.offset = rng.uniform(-kInsertOffsetRange, kInsertOffsetRange);
  return m;
}

Vec2 expert_action(const EpisodeSetup& setup, const world::Scene& scene, const sim::ArmState& state,
                   const Vec2& force, ExpertMemory& memory, RngStream& rng, const ExpertOptions& opts) {
  const Vec2 ee = sim::forward_kinematics(setup.arm, state.q);
  const double fx = opts.zero_force ? 0.0 : std::abs(force[0]);
  if (scene.task == world::TaskId::Insert) {
    insert_tick(scene, ee, fx, memory);
  } else {
    wipe_tick(scene, ee, fx, memory);
  }
  Vec2 q_cmd = sim::inverse_kinematics(setup.arm, memory.p_d);
  if (opts.action_noise) {
    q_cmd[0] += opts.noise_std * rng.normal();
    q_cmd[1] += opts.noise_std * rng.normal();
  }
  return q_cmd;
}

void ScriptedExpert::reset(const world::Scene& scene, RngStream& rng) {
  rng_ = rng;
  memory_ = initial_memory(scene, rng_);
}

Vec2 ScriptedExpert::command(TickContext& ctx) {
  return expert_action(ctx.setup(), ctx.scene(), ctx.current(), ctx.sensor().contact.f, memory_, rng_, opts_);
}

}  // namespace craft::expert
