#include "mstack/controller.hpp"

#include <cmath>

namespace mstack {

ControllerGains select_profile(const std::string& name) {
  if (name == "smooth") {
    return {2.0, 3.0, 6.0};
  }
  if (name == "aggressive") {
    return {6.0, 6.0, 12.0};
  }
  throw UnknownProfile("unknown controller profile '" + name + "'");
}

ControllerOutput compute_control(const FullStateReference& reference,
                                 const UavState& estimate,
                                 const ControllerGains& gains,
                                 const ControllerParams& params) {
  const Vec3 position_error = reference.position - estimate.position;
  const Vec3 velocity_error = reference.velocity - estimate.velocity;

  // Desired force: feedforward + gravity compensation + PD feedback.
  const Vec3 desired_force =
      params.mass * (reference.acceleration + Vec3(0, 0, kGravity) +
                     gains.k_p * position_error + gains.k_v * velocity_error);
  if (desired_force.norm() <= 0.1 * params.mass * kGravity) {
    throw DegenerateForce("demanded force too close to free fall");
  }

  const Mat3 desired_rotation =
      rotation_from_thrust_heading(desired_force, reference.heading);

  ControllerOutput out;
  out.desired_rotation = desired_rotation;
  out.command.thrust = std::clamp(
      desired_force.dot(estimate.rotation.col(2)), 0.0, params.max_thrust);

  // Attitude is always steered toward the unclamped target.
  Vec3 rate = gains.k_r * so3_error(estimate.rotation, desired_rotation);
  // Heading-rate feedforward: world z-rate expressed in the body frame.
  rate += reference.heading_rate * (estimate.rotation.transpose() * Vec3(0, 0, 1));
  const double rate_norm = rate.norm();
  if (rate_norm > params.body_rate_limit) {
    rate *= params.body_rate_limit / rate_norm;
  }
  out.command.body_rate_setpoint = rate;

  out.desired_acceleration = desired_force / params.mass - Vec3(0, 0, kGravity);
  return out;
}

}  // namespace mstack
