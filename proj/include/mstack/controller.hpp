#pragma once

#include <string>

#include "mstack/geometry.hpp"
#include "mstack/plant.hpp"

namespace mstack {

struct ControllerGains {
  double k_p{2.0};  // 1/s^2, position error to acceleration
  double k_v{3.0};  // 1/s, velocity error to acceleration
  double k_r{6.0};  // 1/s, attitude error to body rate
};

// Bundled gain profiles: "smooth" for stable flight, "aggressive" for precise
// fast maneuvers. Throws UnknownProfile for anything else.
ControllerGains select_profile(const std::string& name);

struct ControllerOutput {
  AttitudeRateCommand command;
  Vec3 desired_acceleration{Vec3::Zero()};  // a_d fed back to the estimator
  Mat3 desired_rotation{Mat3::Identity()};
};

struct ControllerParams {
  double mass{2.0};               // kg
  double max_thrust{40.0};        // N, rotor_count * rotor_max_thrust
  double body_rate_limit{6.0};    // rad/s, saturation on the rate setpoint
};

// Geometric reference controller: thrust along the desired force direction,
// heading-exact rotation target, proportional body-rate command from the
// attitude error. Throws DegenerateForce when the demanded specific force
// collapses toward free fall.
ControllerOutput compute_control(const FullStateReference& reference,
                                 const UavState& estimate,
                                 const ControllerGains& gains,
                                 const ControllerParams& params);

}  // namespace mstack
