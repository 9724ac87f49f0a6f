#pragma once

#include <Eigen/Core>

#include "octopath/geometry.hpp"

namespace octopath {

/// Planar skid-steer state: pose in the inertial frame, velocities in the body frame.
struct EgoState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // (-pi, pi]
  double v_x = 0.0;
  double v_y = 0.0;
  double omega_z = 0.0;

  [[nodiscard]] Pose2 pose() const { return {x, y, theta}; }
  [[nodiscard]] Vec2 position() const { return {x, y}; }
  friend bool operator==(const EgoState&, const EgoState&) = default;
};

struct KinematicParams {
  double wheel_radius = 0.165;   // r [m]
  double y_icr0 = 0.35;          // symmetric side ICR offset [m]
  double omega_wheel_max = 15.0; // [rad/s]

  void validate() const;
};

/// Body-frame command (v_x, omega_z).
struct ControlSignal {
  double v_x = 0.0;
  double omega_z = 0.0;
};

struct WheelSpeeds {
  double omega_l = 0.0;
  double omega_r = 0.0;
};

struct BodyVelocity {
  double v_x = 0.0;
  double v_y = 0.0;
  double omega_z = 0.0;
};

struct WorldVelocity {
  double x_dot = 0.0;
  double y_dot = 0.0;
  double theta_dot = 0.0;
};

/// Rotates body-frame velocities into the inertial frame.
[[nodiscard]] WorldVelocity body_to_world(double theta, double v_x, double v_y, double omega_z);

/// Symmetric skid-steer direct kinematics; v_y is identically zero.
[[nodiscard]] BodyVelocity wheel_to_body(const WheelSpeeds& wheels, const KinematicParams& params);

/// Exact inverse of wheel_to_body on (v_x, omega_z). Throws WheelSpeedExceeded
/// when either wheel would exceed omega_wheel_max.
[[nodiscard]] WheelSpeeds body_to_wheel(const ControlSignal& u, const KinematicParams& params);

/// Wheel speeds without the saturation check.
[[nodiscard]] WheelSpeeds body_to_wheel_unchecked(const ControlSignal& u, const KinematicParams& params);

/// Largest |omega_z| reachable at forward speed v_x within the wheel bounds
/// (negative if v_x alone saturates the wheels).
[[nodiscard]] double max_yaw_rate(double v_x, const KinematicParams& params);

/// General ICR Jacobian mapping (omega_l r, omega_r r) to (v_x, v_y, omega_z).
/// Throws DegenerateICR when y_icr_l == y_icr_r.
[[nodiscard]] Eigen::Matrix<double, 3, 2> icr_jacobian(double x_icr, double y_icr_l, double y_icr_r);

/// Closed-form integration under a constant command (straight line or circular arc).
[[nodiscard]] EgoState step_exact(const EgoState& state, const ControlSignal& u, double dt);

}  // namespace octopath
