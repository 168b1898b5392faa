#pragma once

#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mstack/geometry.hpp"

namespace mstack {

// Geometry and constants of one rotor.
struct RotorGeometry {
  Vec3 arm{Vec3::Zero()};  // m, rotor position in body frame
  int spin{+1};            // +1 CCW, -1 CW; sign of the yaw reaction torque
};

// Newton-Euler parameters of the airframe.
struct RigidBodyParams {
  double mass{2.0};                       // kg
  Vec3 inertia{0.03, 0.03, 0.06};         // kg m^2, principal diagonal
  std::vector<RotorGeometry> rotors;
  double motor_time_constant{0.03};       // s, first-order thrust lag
  double rotor_max_thrust{10.0};          // N per rotor
  double rotor_moment_constant{0.016};    // N m of yaw torque per N of thrust
  double drag_coefficient{0.4};           // N s/m, linear in velocity

  int rotor_count() const { return static_cast<int>(rotors.size()); }
  double max_total_thrust() const { return rotor_count() * rotor_max_thrust; }

  // Standard quad-X geometry, arms at 45/135/225/315 deg azimuth.
  static RigidBodyParams quad_x(double mass, double arm_length);
  // Coaxial octocopter: four arms with an upper/lower rotor pair each.
  static RigidBodyParams coax_octo(double mass, double arm_length);
};

struct AllocationResult {
  MotorCommand command;
  bool feasible{true};  // false when clamping distorted the wrench
};

// Minimum-norm per-rotor thrusts reproducing (total thrust, body torque).
// Throws RankDeficientGeometry when the rotor layout cannot span the wrench
// space.
AllocationResult allocate(double total_thrust, const Vec3& torque,
                          const RigidBodyParams& params);

// Rigid-body truth simulation: RK4 at the fast tick with first-order motor
// lag, gravity, linear drag, and optional ground plane support.
class MultirotorPlant {
 public:
  MultirotorPlant(const RigidBodyParams& params, const UavState& initial,
                  std::optional<double> ground_z = std::nullopt);

  const UavState& state() const { return state_; }
  const RigidBodyParams& params() const { return params_; }
  const std::vector<double>& motor_thrust() const { return motor_thrust_; }

  // Presets the motor lag states (e.g. to the hover command for airborne
  // starts).
  void set_motor_thrust(const std::vector<double>& thrust);

  // Current inertial acceleration (thrust + drag + gravity) / m; what an
  // ideal IMU would integrate.
  Vec3 inertial_acceleration() const;

  // Advances the truth state by dt (0 < dt <= 5 ms). Throws InvalidCommand on
  // a wrong rotor count or negative thrust entries.
  void step(const MotorCommand& cmd, double dt);

 private:
  struct Derivative;
  Derivative dynamics(const UavState& s, const std::vector<double>& motors,
                      const std::vector<double>& cmd) const;

  RigidBodyParams params_;
  UavState state_;
  std::vector<double> motor_thrust_;  // N, lagged actual thrusts
  std::optional<double> ground_z_;
};

// Embedded ~1 kHz loop turning (thrust, body-rate setpoint) into per-rotor
// thrusts via PI feedback and the allocator.
class AttitudeRateLoop {
 public:
  struct Gains {
    double rate_p{25.0};        // 1/s
    double rate_i{40.0};        // 1/s^2
    double integrator_limit{2.0};  // rad/s, anti-windup clamp
    // Slow leak so gyro noise cannot random-walk the integrator into a
    // standing torque bias; costs nothing at trim (hover torque is zero).
    double integrator_leak{2.0};   // 1/s
  };

  explicit AttitudeRateLoop(const RigidBodyParams& params);
  AttitudeRateLoop(const RigidBodyParams& params, const Gains& gains);

  void reset();

  // One controller tick; body_rate is the gyro measurement.
  AllocationResult step(const Vec3& body_rate, const AttitudeRateCommand& cmd,
                        double dt);

 private:
  RigidBodyParams params_;
  Gains gains_;
  Vec3 integrator_{Vec3::Zero()};
};

// Accelerometer/gyro simulation with propeller-induced vibration at the rotor
// frequency and its second harmonic.
struct ImuConfig {
  double sample_rate{1000.0};          // Hz
  double accel_noise_sigma{0.05};      // m/s^2
  double gyro_noise_sigma{0.002};      // rad/s, damped-mount grade
  double rotor_frequency{100.0};       // Hz
  double amp_fundamental{0.8};         // m/s^2
  double amp_second_harmonic{0.4};     // m/s^2
  double damping_attenuation{0.2};     // multiplier on both peaks when damped
};

struct ImuSample {
  Vec3 accel{Vec3::Zero()};  // m/s^2, body frame specific force
  Vec3 gyro{Vec3::Zero()};   // rad/s, body frame
};

// Samples the IMU at time t. accel_world is the vehicle's inertial
// acceleration (excluding gravity).
ImuSample sample_imu(const UavState& state, const Vec3& accel_world, double t,
                     const ImuConfig& config, bool damped,
                     std::mt19937_64& rng);

// Odometry source taxonomy used by the estimator.
enum class OdometryKind { kGnssLike, kSlamLike, kVioLike };

struct OdometrySourceConfig {
  OdometryKind kind{OdometryKind::kGnssLike};
  double rate{10.0};                // Hz
  double position_noise_sigma{0.1}; // m
  double heading_noise_sigma{0.01}; // rad
  double drift_rate{0.0};           // m/sqrt(s), vio-like random walk
  double latency{0.0};              // s
  double dropout_probability{0.0};  // per sample
};

struct OdometryMeasurement {
  Vec3 position{Vec3::Zero()};
  double heading{0.0};
  double sample_time{0.0};    // s, when the sensor observed the state
  double delivery_time{0.0};  // s, sample_time + latency
};

// Stateful per-source simulator (owns the drift random walk).
class OdometrySource {
 public:
  OdometrySource(std::string id, const OdometrySourceConfig& config,
                 std::mt19937_64 rng);

  const std::string& id() const { return id_; }
  const OdometrySourceConfig& config() const { return config_; }

  // Samples the source at time t; nullopt models a dropout.
  std::optional<OdometryMeasurement> sample(const UavState& truth, double t);

 private:
  std::string id_;
  OdometrySourceConfig config_;
  std::mt19937_64 rng_;
  Vec3 drift_{Vec3::Zero()};
};

}  // namespace mstack
