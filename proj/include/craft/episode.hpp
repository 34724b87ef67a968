#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "craft/rng.hpp"
#include "craft/sim.hpp"
#include "craft/world.hpp"

namespace craft {

using sim::Vec2;

/// Sensor readout of one control tick, taken from the tick's final physics
/// substep: `state` is the state the integrator started that substep from,
/// `qddot` the acceleration it realized and `q_d` the target in force.
struct SensorSnapshot {
  sim::ArmState state;
  Vec2 qddot = Vec2::Zero();
  Vec2 q_d = Vec2::Zero();
  sim::TorqueObservation torque;
  world::ContactForce contact;
  Vec2 ee = Vec2::Zero();
};

struct EpisodeSetup {
  world::TaskSpec task;
  sim::ArmParams arm;
  sim::ImpedanceGains gains;
};

// Rest pose the arm starts every episode from.
Vec2 home_position(const world::TaskSpec& task);

/// What a controller may look at during one tick. Privileged members (scene,
/// current state) are for the scripted expert only; policies use the sensor and
/// the rendered view.
class TickContext {
 public:
  TickContext(const EpisodeSetup& setup, const world::Scene& scene, int tick, const SensorSnapshot& sensor,
              const sim::ArmState& current, const RngStream& render_stream);

  int tick() const { return tick_; }
  const EpisodeSetup& setup() const { return setup_; }
  const world::Scene& scene() const { return scene_; }
  const SensorSnapshot& sensor() const { return sensor_; }
  const sim::ArmState& current() const { return current_; }

  // Rendered from sensor().state.q; noise stream is derived from the tick so
  // the image does not depend on whether or when it is requested.
  const std::array<std::uint8_t, world::kVisionPixels>& vision();

 private:
  const EpisodeSetup& setup_;
  const world::Scene& scene_;
  int tick_;
  const SensorSnapshot& sensor_;
  const sim::ArmState& current_;
  const RngStream& render_stream_;
  std::optional<std::array<std::uint8_t, world::kVisionPixels>> vision_;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(const world::Scene& scene, RngStream& rng) = 0;
  virtual Vec2 command(TickContext& ctx) = 0;
};

/// One synchronized tick of a demonstration.
struct DemoRecord {
  std::uint32_t episode_id = 0;
  std::uint32_t t = 0;
  std::array<std::uint8_t, world::kVisionPixels> vision{};
  std::uint8_t lang_id = 0;
  Vec2 q = Vec2::Zero();
  Vec2 qdot = Vec2::Zero();
  Vec2 tau_obs = Vec2::Zero();
  Vec2 tau_ext = Vec2::Zero();
  Vec2 qddot = Vec2::Zero();
  Vec2 q_d = Vec2::Zero();  // target in force while the torque was sensed
  Vec2 q_cmd = Vec2::Zero();  // command issued at this tick

  bool operator==(const DemoRecord&) const = default;
};

struct EpisodeResult {
  std::vector<world::TraceSample> trace;
  std::vector<DemoRecord> records;  // filled only when recording
  world::SuccessReport report;
  bool fault = false;  // simulation fault or unreachable command
  std::uint64_t digest = 0;  // FNV-1a over the per-tick state bytes
};

/// Runs one closed-loop episode at 100 Hz control / 400 Hz physics. Faults end
/// the episode early and mark it failed.
EpisodeResult run_episode(const EpisodeSetup& setup, const world::Scene& scene, Controller& controller,
                          const RngStream& rng, bool record, std::uint32_t episode_id = 0);

}  // namespace craft
