#pragma once

// Planar two-link arm in a gravity-free horizontal plane, driven by a
// joint-space impedance controller.
//
// Sign convention for external torque: `tau_ext` is the load torque, i.e. the
// joint torque the arm exerts on its environment through the end effector,
// tau_ext = -J^T f where f is the contact force acting on the end effector.
// Dynamics are  M(q) qddot + c(q, qdot) = tau_cmd - tau_ext.

#include <Eigen/Core>

namespace craft::sim {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPhysicsDt = 0.0025;
inline constexpr int kSubsteps = 4;
inline constexpr double kControlDt = kPhysicsDt * kSubsteps;
inline constexpr double kTorqueLimit = 20.0;
inline constexpr double kVelocityLimit = 50.0;

/// Link lengths (m) and point masses at the distal link ends (kg).
struct ArmParams {
  double l1 = 0.5;
  double l2 = 0.5;
  double m1 = 1.0;
  double m2 = 1.0;

  void validate() const;
};

struct ArmState {
  Vec2 q = Vec2::Zero();
  Vec2 qdot = Vec2::Zero();
  double t = 0.0;
};

struct ImpedanceGains {
  Vec2 stiffness = Vec2(30.0, 30.0);
  Vec2 damping = Vec2(4.0, 4.0);

  void validate() const;
};

// Desired acceleration is identically zero and therefore not stored.
struct TargetTrajectory {
  Vec2 q_d = Vec2::Zero();
  Vec2 qdot_d = Vec2::Zero();
};

struct TorqueObservation {
  Vec2 tau_obs = Vec2::Zero();
  Vec2 tau_ext = Vec2::Zero();
  Vec2 tau_cmd = Vec2::Zero();
};

struct StepResult {
  ArmState state;
  Vec2 qddot = Vec2::Zero();
};

Vec2 forward_kinematics(const ArmParams& arm, const Vec2& q);
Mat2 jacobian(const ArmParams& arm, const Vec2& q);
Vec2 end_effector_velocity(const ArmParams& arm, const ArmState& s);

/// Elbow-down (q2 <= 0) solution. Throws ReachabilityError outside the annulus
/// |l1 - l2| + 1e-6 <= |p| <= l1 + l2.
Vec2 inverse_kinematics(const ArmParams& arm, const Vec2& p);

Mat2 mass_matrix(const ArmParams& arm, const Vec2& q);
Vec2 coriolis(const ArmParams& arm, const Vec2& q, const Vec2& qdot);
double kinetic_energy(const ArmParams& arm, const ArmState& s);

/// K (q_d - q) + D (qdot_d - qdot), clamped per joint to +-kTorqueLimit.
Vec2 impedance_torque(const ArmState& s, const TargetTrajectory& target, const ImpedanceGains& gains);

/// One semi-implicit Euler substep. Velocities are clamped to +-kVelocityLimit.
/// Throws SimulationFault when the state becomes non-finite.
StepResult step(const ArmParams& arm, const ArmState& s, const Vec2& tau_cmd, const Vec2& tau_ext,
                double dt = kPhysicsDt);

/// tau_obs = K (q_d - q) + D (qdot_d - qdot) + M(q) (0 - qddot) + tau_ext, using
/// the state and acceleration of the substep that produced `qddot`.
TorqueObservation observed_torque(const ArmParams& arm, const ArmState& s, const TargetTrajectory& target,
                                  const ImpedanceGains& gains, const Vec2& qddot, const Vec2& tau_ext);

}  // namespace craft::sim
