#include "craft/episode.hpp"

#include <cstring>

#include "craft/errors.hpp"

namespace craft {
namespace {

std::uint64_t fnv_mix(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv_vec(std::uint64_t h, const Vec2& v) {
  const double d[2] = {v[0], v[1]};
  return fnv_mix(h, d, sizeof d);
}

}  // namespace

Vec2 home_position(const world::TaskSpec& task) { return {task.wall_x - 0.3, 0.0}; }

TickContext::TickContext(const EpisodeSetup& setup, const world::Scene& scene, int tick, const SensorSnapshot& sensor,
                         const sim::ArmState& current, const RngStream& render_stream)
    : setup_(setup), scene_(scene), tick_(tick), sensor_(sensor), current_(current), render_stream_(render_stream) {}

const std::array<std::uint8_t, world::kVisionPixels>& TickContext::vision() {
  if (!vision_) {
    RngStream noise = render_stream_.derive(static_cast<std::uint64_t>(tick_));
    vision_ = world::quantize(world::render(scene_, setup_.arm, sensor_.state.q, &noise));
  }
  return *vision_;
}

EpisodeResult run_episode(const EpisodeSetup& setup, const world::Scene& scene, Controller& controller,
                          const RngStream& rng, bool record, std::uint32_t episode_id) {
  setup.task.validate();
  setup.arm.validate();
  setup.gains.validate();

  EpisodeResult out;
  out.digest = 0xcbf29ce484222325ULL;
  const RngStream render_stream = rng.derive("render");
  RngStream controller_stream = rng.derive("controller");
  controller.reset(scene, controller_stream);

  sim::ArmState state;
  state.q = sim::inverse_kinematics(setup.arm, home_position(setup.task));

  SensorSnapshot sensor;
  sensor.state = state;
  sensor.q_d = state.q;
  sensor.ee = sim::forward_kinematics(setup.arm, state.q);
  sensor.contact = world::contact_force(scene, sensor.ee, Vec2::Zero());
  sensor.torque = sim::observed_torque(setup.arm, state, {state.q, Vec2::Zero()}, setup.gains, Vec2::Zero(),
                                       -sim::jacobian(setup.arm, state.q).transpose() * sensor.contact.f);

  const int len = setup.task.episode_len;
  out.trace.reserve(len);
  if (record) out.records.reserve(len);
  const auto lang = static_cast<std::uint8_t>(scene.task);

  try {
    for (int t = 0; t < len; ++t) {
      TickContext ctx(setup, scene, t, sensor, state, render_stream);
      const Vec2 q_cmd = controller.command(ctx);
      if (!q_cmd.allFinite()) throw SimulationFault("non-finite command at tick " + std::to_string(t));

      if (record) {
        DemoRecord r;
        r.episode_id = episode_id;
        r.t = static_cast<std::uint32_t>(t);
        r.vision = ctx.vision();
        r.lang_id = lang;
        r.q = sensor.state.q;
        r.qdot = sensor.state.qdot;
        r.tau_obs = sensor.torque.tau_obs;
        r.tau_ext = sensor.torque.tau_ext;
        r.qddot = sensor.qddot;
        r.q_d = sensor.q_d;
        r.q_cmd = q_cmd;
        out.records.push_back(r);
      }

      const sim::TargetTrajectory target{q_cmd, Vec2::Zero()};
      for (int k = 0; k < sim::kSubsteps; ++k) {
        const Vec2 ee = sim::forward_kinematics(setup.arm, state.q);
        const sim::Mat2 J = sim::jacobian(setup.arm, state.q);
        const world::ContactForce contact = world::contact_force(scene, ee, J * state.qdot);
        const Vec2 tau_ext = -J.transpose() * contact.f;
        const Vec2 tau_cmd = sim::impedance_torque(state, target, setup.gains);
        const sim::StepResult res = sim::step(setup.arm, state, tau_cmd, tau_ext);
        if (k == sim::kSubsteps - 1) {
          sensor.state = state;
          sensor.qddot = res.qddot;
          sensor.q_d = q_cmd;
          sensor.torque = sim::observed_torque(setup.arm, state, target, setup.gains, res.qddot, tau_ext);
          sensor.contact = contact;
          sensor.ee = ee;
        }
        state = res.state;
      }
      out.trace.push_back({sensor.ee, sensor.contact});
      out.digest = fnv_vec(fnv_vec(fnv_vec(out.digest, state.q), state.qdot), q_cmd);
    }
  } catch (const SimulationFault&) {
    out.fault = true;
  } catch (const ReachabilityError&) {
    out.fault = true;
  }

  if (!out.trace.empty()) out.report = world::judge(scene, out.trace);
  if (out.fault) out.report.success = false;
  return out;
}

}  // namespace craft
