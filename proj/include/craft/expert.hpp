#pragma once

#include "craft/episode.hpp"

namespace craft::expert {

enum class Phase { Approach, Advance, Slide, Push, Press, Done };

struct ExpertOptions {
  bool action_noise = true;
  double noise_std = 0.005;  // rad, added to every commanded joint target
  bool zero_force = false;  // diagnostic: the expert senses no force
};

/// Phase memory of the scripted demonstrator.
struct ExpertMemory {
  Phase phase = Phase::Approach;
  double offset = 0.0;  // Insert: lateral approach error
  Vec2 p_d = Vec2::Zero();  // Cartesian set-point
  bool traversing = false;  // Wipe: contact established, sweeping
  int gap_ticks = 0;  // Insert: consecutive ticks below the gap force
  bool started = false;  // Wipe: set-point initialized at the end effector
};

inline constexpr double kApproachStandoff = 0.10;
inline constexpr double kInsertOffsetRange = 0.10;
inline constexpr double kInsertContactForce = 1.0;
inline constexpr double kInsertGapForce = 0.2;
inline constexpr double kInsertPushDepth = 0.08;
inline constexpr double kInsertAdvanceReach = 0.01;  // Advance set-point stops this far past the wall face
inline constexpr int kGapDebounceTicks = 3;
inline constexpr double kInsertJamForce = 4.0;
inline constexpr double kInsertRepress = 0.02;
inline constexpr double kSweepSpeed = 0.1;  // m/s for advance, slide and traverse
inline constexpr double kWipeStandoff = 0.05;
inline constexpr double kWipeForceTarget = 3.0;
inline constexpr double kWipePressGain = 0.0005;  // m per tick per N
inline constexpr double kWipeTransitSpeed = 0.5;  // m/s set-point speed towards the start of the stroke

ExpertMemory initial_memory(const world::Scene& scene, RngStream& rng);

/// One control tick of the force-feedback demonstrator. `force` is the measured
/// contact force on the end effector. Throws ReachabilityError if the set-point
/// leaves the workspace.
Vec2 expert_action(const EpisodeSetup& setup, const world::Scene& scene, const sim::ArmState& state,
                   const Vec2& force, ExpertMemory& memory, RngStream& rng, const ExpertOptions& opts = {});

class ScriptedExpert final : public Controller {
 public:
  explicit ScriptedExpert(ExpertOptions opts = {}) : opts_(opts) {}
  void reset(const world::Scene& scene, RngStream& rng) override;
  Vec2 command(TickContext& ctx) override;
  const ExpertMemory& memory() const { return memory_; }

 private:
  ExpertOptions opts_;
  ExpertMemory memory_;
  RngStream rng_{0};
};

}  // namespace craft::expert
