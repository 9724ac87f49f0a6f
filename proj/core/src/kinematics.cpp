#include "octopath/kinematics.hpp"

#include <cmath>

#include "octopath/error.hpp"

namespace octopath {

void KinematicParams::validate() const {
  if (!(wheel_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "wheel radius must be positive");
  if (!(y_icr0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "y_icr0 must be positive");
  if (!(omega_wheel_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "omega_wheel_max must be positive");
}

WorldVelocity body_to_world(double theta, double v_x, double v_y, double omega_z) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v_x - s * v_y, s * v_x + c * v_y, omega_z};
}

BodyVelocity wheel_to_body(const WheelSpeeds& wheels, const KinematicParams& params) {
  const double v_l = wheels.omega_l * params.wheel_radius;
  const double v_r = wheels.omega_r * params.wheel_radius;
  return {(v_l + v_r) / 2.0, 0.0, (-v_l + v_r) / (2.0 * params.y_icr0)};
}

WheelSpeeds body_to_wheel_unchecked(const ControlSignal& u, const KinematicParams& params) {
  const double spin = u.omega_z * params.y_icr0;
  return {(u.v_x - spin) / params.wheel_radius, (u.v_x + spin) / params.wheel_radius};
}

WheelSpeeds body_to_wheel(const ControlSignal& u, const KinematicParams& params) {
  const WheelSpeeds w = body_to_wheel_unchecked(u, params);
  if (std::abs(w.omega_l) > params.omega_wheel_max || std::abs(w.omega_r) > params.omega_wheel_max) {
    throw Error(ErrorCode::WheelSpeedExceeded,
                "command (" + std::to_string(u.v_x) + ", " + std::to_string(u.omega_z) + ") needs wheel speeds (" +
                    std::to_string(w.omega_l) + ", " + std::to_string(w.omega_r) + ")");
  }
  return w;
}

double max_yaw_rate(double v_x, const KinematicParams& params) {
  return (params.omega_wheel_max * params.wheel_radius - std::abs(v_x)) / params.y_icr0;
}

Eigen::Matrix<double, 3, 2> icr_jacobian(double x_icr, double y_icr_l, double y_icr_r) {
  if (y_icr_l == y_icr_r) throw Error(ErrorCode::DegenerateICR, "left and right ICR coincide");
  Eigen::Matrix<double, 3, 2> j;
  j << -y_icr_r, y_icr_l,
       x_icr, -x_icr,
       -1.0, 1.0;
  return j / (y_icr_l - y_icr_r);
}

EgoState step_exact(const EgoState& state, const ControlSignal& u, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  EgoState next = state;
  const double th = state.theta;
  if (std::abs(u.omega_z) < 1e-9) {
    next.x = state.x + u.v_x * std::cos(th) * dt;
    next.y = state.y + u.v_x * std::sin(th) * dt;
    next.theta = wrap_angle(th + u.omega_z * dt);
  } else {
    const double radius = u.v_x / u.omega_z;
    const double th1 = th + u.omega_z * dt;
    next.x = state.x + radius * (std::sin(th1) - std::sin(th));
    next.y = state.y + radius * (std::cos(th) - std::cos(th1));
    next.theta = wrap_angle(th1);
  }
  next.v_x = u.v_x;
  next.v_y = 0.0;
  next.omega_z = u.omega_z;
  return next;
}

}  // namespace octopath
