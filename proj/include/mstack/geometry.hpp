#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mstack/errors.hpp"

namespace mstack {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using UavId = std::uint16_t;

inline constexpr double kGravity = 9.81;  // m/s^2

// Ground-truth or estimated rigid-body state. rotation is world-from-body.
struct UavState {
  Vec3 position{Vec3::Zero()};   // m, world
  Vec3 velocity{Vec3::Zero()};   // m/s, world
  Mat3 rotation{Mat3::Identity()};
  Vec3 body_rate{Vec3::Zero()};  // rad/s, body
};

// Sparse position + heading setpoint consumed by the tracker.
struct ReferenceCommand {
  Vec3 position{Vec3::Zero()};  // m
  double heading{0.0};          // rad, wrapped to (-pi, pi]
};

// Smooth full-state reference emitted by the tracker at 100 Hz.
struct FullStateReference {
  Vec3 position{Vec3::Zero()};      // m
  Vec3 velocity{Vec3::Zero()};      // m/s
  Vec3 acceleration{Vec3::Zero()};  // m/s^2
  double heading{0.0};              // rad
  double heading_rate{0.0};         // rad/s
};

// Collective thrust + body-rate setpoint for the embedded rate loop.
struct AttitudeRateCommand {
  double thrust{0.0};                     // N, >= 0
  Vec3 body_rate_setpoint{Vec3::Zero()};  // rad/s
};

// Allocated per-rotor thrusts.
struct MotorCommand {
  std::vector<double> thrust;  // N, one entry per rotor, each >= 0
};

// Skew-symmetric matrix of v (hat map).
Mat3 hat(const Vec3& v);

// Inverse of the hat map on a skew-symmetric matrix.
Vec3 vee(const Mat3& m);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

// Wraps an angle to (-pi, pi].
double wrap_heading(double eta);

// Heading = azimuth of the body x-axis projected onto the world horizontal
// plane. Throws DegenerateHeading when the body x-axis is within 1e-6 of
// vertical.
double heading_of(const Mat3& rotation);

// Body-frame attitude error such that omega = k * so3_error(R, R_d) turns R
// toward R_d. Zero iff R == R_d; antisymmetric in argument swap.
Vec3 so3_error(const Mat3& rotation, const Mat3& desired);

// Nearest rotation matrix (polar decomposition via SVD).
Mat3 orthonormalized(const Mat3& m);

// True when m is orthonormal with determinant +1 within tol.
bool is_rotation(const Mat3& m, double tol = 1e-9);

// Builds the rotation whose body z-axis is thrust_dir (world frame, must not
// be horizontal) and whose heading is exactly the given value.
Mat3 rotation_from_thrust_heading(const Vec3& thrust_dir, double heading);

}  // namespace mstack
