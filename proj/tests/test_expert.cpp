#include "doctest.h"

#include <cmath>

#include "craft/episode.hpp"
#include "craft/expert.hpp"

using namespace craft;
using namespace craft::expert;

namespace {

EpisodeSetup make_setup(world::TaskId task) {
  EpisodeSetup s;
  s.task.task = task;
  return s;
}

double success_rate(world::TaskId task, int n, const ExpertOptions& opts, std::uint64_t seed) {
  const EpisodeSetup setup = make_setup(task);
  int ok = 0;
#pragma omp parallel for reduction(+ : ok) schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const RngStream stream = RngStream(seed, "expert-test").derive(static_cast<std::uint64_t>(i));
    RngStream scene_rng = stream.derive("scene");
    const world::Scene scene = world::sample_scene(setup.task, world::Regime::InDist, scene_rng);
    ScriptedExpert expert(opts);
    ok += run_episode(setup, scene, expert, stream.derive("episode"), false).report.success;
  }
  return static_cast<double>(ok) / n;
}

}  // namespace

TEST_CASE("insert approach commands the inverse kinematics of the standoff waypoint") {
  const EpisodeSetup setup = make_setup(world::TaskId::Insert);
  world::Scene scene;
  scene.task = world::TaskId::Insert;
  scene.target_y = 0.12;
  ExpertMemory m;  // offset e = 0
  RngStream rng(1);
  sim::ArmState state;
  state.q = sim::inverse_kinematics(setup.arm, home_position(setup.task));
  const Vec2 q_cmd = expert_action(setup, scene, state, Vec2::Zero(), m, rng, {false});
  const Vec2 expected = sim::inverse_kinematics(setup.arm, Vec2(scene.wall_x - kApproachStandoff, 0.12));
  CHECK(q_cmd == expected);
  CHECK(m.phase == Phase::Approach);
}

TEST_CASE("wipe press loop is still at the target force") {
  const EpisodeSetup setup = make_setup(world::TaskId::Wipe);
  world::Scene scene;
  scene.task = world::TaskId::Wipe;
  ExpertMemory m;
  m.phase = Phase::Press;
  m.started = true;
  m.p_d = Vec2(scene.wall_x - 0.01, -0.21);
  RngStream rng(1);
  sim::ArmState state;
  state.q = sim::inverse_kinematics(setup.arm, m.p_d);
  expert_action(setup, scene, state, Vec2(-kWipeForceTarget, 0.0), m, rng, {false});
  CHECK(m.p_d[0] == scene.wall_x - 0.01);
  CHECK(m.traversing);

  // Below the target the set-point moves into the wall.
  const double before = m.p_d[0];
  expert_action(setup, scene, state, Vec2(-1.0, 0.0), m, rng, {false});
  CHECK(m.p_d[0] == doctest::Approx(before + kWipePressGain * 2.0));
}

TEST_CASE("command noise has the configured spread") {
  const EpisodeSetup setup = make_setup(world::TaskId::Insert);
  world::Scene scene;
  sim::ArmState state;
  state.q = sim::inverse_kinematics(setup.arm, home_position(setup.task));
  RngStream rng(3, "noise");
  const int n = 20000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    ExpertMemory m;
    const Vec2 clean = [&] {
      ExpertMemory m2;
      RngStream unused(0);
      return expert_action(setup, scene, state, Vec2::Zero(), m2, unused, {false});
    }();
    const double d = (expert_action(setup, scene, state, Vec2::Zero(), m, rng) - clean)[0];
    s += d;
    s2 += d * d;
  }
  CHECK(std::abs(s / n) < 2e-4);
  CHECK(std::sqrt(s2 / n) == doctest::Approx(0.005).epsilon(0.03));
}

TEST_CASE("scripted expert succeeds on 200 seeded episodes per task") {
  for (world::TaskId task : {world::TaskId::Insert, world::TaskId::Wipe}) {
    const double rate = success_rate(task, 200, {}, 17);
    MESSAGE(world::to_string(task), " expert success ", rate);
    CHECK(rate >= 0.9);
  }
}

TEST_CASE("insert demonstrations depend on the sensed force") {
  ExpertOptions blind;
  blind.zero_force = true;
  const double rate = success_rate(world::TaskId::Insert, 200, blind, 17);
  MESSAGE("zero-force insert success ", rate);
  CHECK(rate < 0.5);
}

TEST_CASE("episodes are deterministic and vision is synchronized with q") {
  const EpisodeSetup setup = make_setup(world::TaskId::Wipe);
  const RngStream stream(5, "sync");
  RngStream scene_rng = stream.derive("scene");
  const world::Scene scene = world::sample_scene(setup.task, world::Regime::InDist, scene_rng);
  ScriptedExpert a, b;
  const EpisodeResult ra = run_episode(setup, scene, a, stream.derive("episode"), true);
  const EpisodeResult rb = run_episode(setup, scene, b, stream.derive("episode"), true);
  CHECK(ra.digest == rb.digest);
  CHECK(ra.records == rb.records);
  REQUIRE(ra.records.size() == static_cast<std::size_t>(setup.task.episode_len));

  const RngStream render_stream = stream.derive("episode").derive("render");
  for (std::size_t t = 0; t < ra.records.size(); t += 37) {
    const DemoRecord& r = ra.records[t];
    RngStream noise = render_stream.derive(static_cast<std::uint64_t>(t));
    CHECK(r.vision == world::quantize(world::render(scene, setup.arm, r.q, &noise)));
    CHECK(r.t == t);
  }
}
