#include "craft/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "craft/errors.hpp"

namespace craft::sim {

void ArmParams::validate() const {
  if (!(l1 > 0 && l2 > 0 && m1 > 0 && m2 > 0)) throw ContractViolation("arm parameters must be positive");
}

void ImpedanceGains::validate() const {
  if (!((stiffness.array() > 0).all() && (damping.array() > 0).all()))
    throw ContractViolation("impedance gains must be positive");
}

Vec2 forward_kinematics(const ArmParams& arm, const Vec2& q) {
  const double q12 = q[0] + q[1];
  return {arm.l1 * std::cos(q[0]) + arm.l2 * std::cos(q12), arm.l1 * std::sin(q[0]) + arm.l2 * std::sin(q12)};
}

Mat2 jacobian(const ArmParams& arm, const Vec2& q) {
  const double q12 = q[0] + q[1];
  const double s1 = std::sin(q[0]), c1 = std::cos(q[0]);
  const double s12 = std::sin(q12), c12 = std::cos(q12);
  Mat2 J;
  J << -arm.l1 * s1 - arm.l2 * s12, -arm.l2 * s12,  //
      arm.l1 * c1 + arm.l2 * c12, arm.l2 * c12;
  return J;
}

Vec2 end_effector_velocity(const ArmParams& arm, const ArmState& s) { return jacobian(arm, s.q) * s.qdot; }

Vec2 inverse_kinematics(const ArmParams& arm, const Vec2& p) {
  const double r = p.norm();
  const double r_min = std::abs(arm.l1 - arm.l2) + 1e-6;
  const double r_max = arm.l1 + arm.l2;
  if (!std::isfinite(r) || r < r_min || r > r_max * (1.0 + 1e-12)) {
    throw ReachabilityError("point (" + std::to_string(p[0]) + ", " + std::to_string(p[1]) + ") is out of reach");
  }
  const double c2 = std::clamp((r * r - arm.l1 * arm.l1 - arm.l2 * arm.l2) / (2.0 * arm.l1 * arm.l2), -1.0, 1.0);
  const double q2 = -std::acos(c2);
  const double q1 = std::atan2(p[1], p[0]) - std::atan2(arm.l2 * std::sin(q2), arm.l1 + arm.l2 * std::cos(q2));
  return {q1, q2};
}

Mat2 mass_matrix(const ArmParams& arm, const Vec2& q) {
  const double c2 = std::cos(q[1]);
  const double l2sq = arm.l2 * arm.l2;
  const double cross = arm.m2 * arm.l1 * arm.l2 * c2;
  Mat2 M;
  M(0, 0) = (arm.m1 + arm.m2) * arm.l1 * arm.l1 + arm.m2 * l2sq + 2.0 * cross;
  M(0, 1) = arm.m2 * l2sq + cross;
  M(1, 0) = M(0, 1);
  M(1, 1) = arm.m2 * l2sq;
  return M;
}

Vec2 coriolis(const ArmParams& arm, const Vec2& q, const Vec2& qdot) {
  const double h = arm.m2 * arm.l1 * arm.l2 * std::sin(q[1]);
  return {-h * (2.0 * qdot[0] * qdot[1] + qdot[1] * qdot[1]), h * qdot[0] * qdot[0]};
}

double kinetic_energy(const ArmParams& arm, const ArmState& s) {
  return 0.5 * s.qdot.dot(mass_matrix(arm, s.q) * s.qdot);
}

Vec2 impedance_torque(const ArmState& s, const TargetTrajectory& target, const ImpedanceGains& gains) {
  Vec2 tau = gains.stiffness.cwiseProduct(target.q_d - s.q) + gains.damping.cwiseProduct(target.qdot_d - s.qdot);
  return tau.cwiseMax(-kTorqueLimit).cwiseMin(kTorqueLimit);
}

StepResult step(const ArmParams& arm, const ArmState& s, const Vec2& tau_cmd, const Vec2& tau_ext, double dt) {
  const Mat2 M = mass_matrix(arm, s.q);
  const Vec2 rhs = tau_cmd - tau_ext - coriolis(arm, s.q, s.qdot);
  // Closed-form 2x2 solve keeps the arithmetic explicit and platform-stable.
  const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  const Vec2 qddot((M(1, 1) * rhs[0] - M(0, 1) * rhs[1]) / det, (M(0, 0) * rhs[1] - M(1, 0) * rhs[0]) / det);

  StepResult out;
  out.qddot = qddot;
  out.state.qdot = (s.qdot + qddot * dt).cwiseMax(-kVelocityLimit).cwiseMin(kVelocityLimit);
  out.state.q = s.q + out.state.qdot * dt;
  out.state.t = s.t + dt;
  if (!out.state.q.allFinite() || !out.state.qdot.allFinite() || !qddot.allFinite()) {
    throw SimulationFault("non-finite arm state at t=" + std::to_string(out.state.t));
  }
  return out;
}

TorqueObservation observed_torque(const ArmParams& arm, const ArmState& s, const TargetTrajectory& target,
                                  const ImpedanceGains& gains, const Vec2& qddot, const Vec2& tau_ext) {
  TorqueObservation obs;
  const Vec2 spring = gains.stiffness.cwiseProduct(target.q_d - s.q);
  const Vec2 damper = gains.damping.cwiseProduct(target.qdot_d - s.qdot);
  const Vec2 inertial = mass_matrix(arm, s.q) * (Vec2::Zero() - qddot);
  obs.tau_obs = spring + damper + inertial + tau_ext;
  obs.tau_ext = tau_ext;
  obs.tau_cmd = impedance_torque(s, target, gains);
  return obs;
}

}  // namespace craft::sim
