#include "mstack/plant.hpp"

#include <cmath>
#include <numbers>

#include "mstack/rng.hpp"

namespace mstack {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

RigidBodyParams RigidBodyParams::quad_x(double mass, double arm_length) {
  RigidBodyParams p;
  p.mass = mass;
  const double l = arm_length / std::numbers::sqrt2;
  // Diagonal pairs share spin so yaw authority decouples from roll/pitch.
  p.rotors = {
      {{+l, +l, 0.0}, +1},
      {{-l, -l, 0.0}, +1},
      {{-l, +l, 0.0}, -1},
      {{+l, -l, 0.0}, -1},
  };
  p.inertia = Vec3(0.02, 0.02, 0.035) * mass;
  return p;
}

RigidBodyParams RigidBodyParams::coax_octo(double mass, double arm_length) {
  RigidBodyParams p;
  p.mass = mass;
  const double l = arm_length / std::numbers::sqrt2;
  p.rotors.clear();
  const Vec3 arms[4] = {{+l, +l, 0.0}, {-l, +l, 0.0}, {-l, -l, 0.0}, {+l, -l, 0.0}};
  for (const auto& arm : arms) {
    p.rotors.push_back({arm + Vec3(0, 0, +0.04), +1});  // upper rotor
    p.rotors.push_back({arm + Vec3(0, 0, -0.04), -1});  // lower rotor
  }
  p.inertia = Vec3(0.025, 0.025, 0.045) * mass;
  return p;
}

AllocationResult allocate(double total_thrust, const Vec3& torque,
                          const RigidBodyParams& params) {
  const int n = params.rotor_count();
  if (n < 1) {
    throw RankDeficientGeometry("no rotors configured");
  }
  Eigen::MatrixXd a(4, n);
  for (int i = 0; i < n; ++i) {
    const auto& rotor = params.rotors[i];
    a(0, i) = 1.0;
    a(1, i) = rotor.arm.y();   // roll torque per N
    a(2, i) = -rotor.arm.x();  // pitch torque per N
    a(3, i) = rotor.spin * params.rotor_moment_constant;
  }
  const Eigen::Matrix4d gram = a * a.transpose();
  Eigen::FullPivLU<Eigen::Matrix4d> lu(gram);
  if (lu.rank() < 4) {
    throw RankDeficientGeometry("rotor geometry cannot span thrust + 3 torques");
  }
  Eigen::Vector4d wrench(total_thrust, torque.x(), torque.y(), torque.z());
  Eigen::VectorXd thrusts = a.transpose() * lu.solve(wrench);

  AllocationResult result;
  result.command.thrust.resize(n);
  result.feasible = true;
  for (int i = 0; i < n; ++i) {
    double t = thrusts(i);
    if (t < -1e-9 || t > params.rotor_max_thrust + 1e-9) {
      result.feasible = false;
    }
    result.command.thrust[i] = std::clamp(t, 0.0, params.rotor_max_thrust);
  }
  return result;
}

struct MultirotorPlant::Derivative {
  Vec3 velocity;
  Vec3 accel;
  Mat3 rotation_dot;
  Vec3 body_rate_dot;
  std::vector<double> motor_dot;
};

MultirotorPlant::MultirotorPlant(const RigidBodyParams& params,
                                 const UavState& initial,
                                 std::optional<double> ground_z)
    : params_(params),
      state_(initial),
      motor_thrust_(params.rotors.size(), 0.0),
      ground_z_(ground_z) {}

void MultirotorPlant::set_motor_thrust(const std::vector<double>& thrust) {
  if (thrust.size() != motor_thrust_.size()) {
    throw InvalidCommand("motor preset has wrong rotor count");
  }
  motor_thrust_ = thrust;
}

Vec3 MultirotorPlant::inertial_acceleration() const {
  double total_thrust = 0.0;
  for (double t : motor_thrust_) {
    total_thrust += t;
  }
  const Vec3 thrust_world = state_.rotation.col(2) * total_thrust;
  const Vec3 gravity(0, 0, -params_.mass * kGravity);
  const Vec3 drag = -params_.drag_coefficient * state_.velocity;
  return (thrust_world + gravity + drag) / params_.mass;
}

MultirotorPlant::Derivative MultirotorPlant::dynamics(
    const UavState& s, const std::vector<double>& motors,
    const std::vector<double>& cmd) const {
  Derivative d;
  d.velocity = s.velocity;

  double total_thrust = 0.0;
  Vec3 torque = Vec3::Zero();
  for (std::size_t i = 0; i < motors.size(); ++i) {
    total_thrust += motors[i];
    const auto& rotor = params_.rotors[i];
    torque += rotor.arm.cross(Vec3(0, 0, motors[i]));
    torque.z() += rotor.spin * params_.rotor_moment_constant * motors[i];
  }

  const Vec3 thrust_world = s.rotation.col(2) * total_thrust;
  const Vec3 gravity(0, 0, -params_.mass * kGravity);
  const Vec3 drag = -params_.drag_coefficient * s.velocity;
  d.accel = (thrust_world + gravity + drag) / params_.mass;

  d.rotation_dot = s.rotation * hat(s.body_rate);

  const Vec3 inertia = params_.inertia;
  const Vec3 angular_momentum = inertia.cwiseProduct(s.body_rate);
  const Vec3 gyroscopic = s.body_rate.cross(angular_momentum);
  d.body_rate_dot = (torque - gyroscopic).cwiseQuotient(inertia);

  d.motor_dot.resize(motors.size());
  for (std::size_t i = 0; i < motors.size(); ++i) {
    d.motor_dot[i] = (cmd[i] - motors[i]) / params_.motor_time_constant;
  }
  return d;
}

void MultirotorPlant::step(const MotorCommand& cmd, double dt) {
  if (dt <= 0.0 || dt > 0.005) {
    throw InvalidCommand("plant step dt outside (0, 0.005]");
  }
  if (static_cast<int>(cmd.thrust.size()) != params_.rotor_count()) {
    throw InvalidCommand("motor command has wrong rotor count");
  }
  for (double t : cmd.thrust) {
    if (t < 0.0 || !std::isfinite(t)) {
      throw InvalidCommand("motor command thrust negative or non-finite");
    }
  }

  // Classic RK4 over (p, v, R, omega, motor thrusts); R is re-orthonormalized
  // after the additive update.
  const auto eval = [&](const UavState& s, const std::vector<double>& motors) {
    return dynamics(s, motors, cmd.thrust);
  };
  const auto advance = [&](const Derivative& d, double h, UavState& s,
                           std::vector<double>& motors) {
    s.position = state_.position + h * d.velocity;
    s.velocity = state_.velocity + h * d.accel;
    s.rotation = state_.rotation + h * d.rotation_dot;
    s.body_rate = state_.body_rate + h * d.body_rate_dot;
    for (std::size_t i = 0; i < motors.size(); ++i) {
      motors[i] = motor_thrust_[i] + h * d.motor_dot[i];
    }
  };

  UavState scratch = state_;
  std::vector<double> motors = motor_thrust_;

  const Derivative k1 = eval(state_, motor_thrust_);
  advance(k1, dt / 2, scratch, motors);
  const Derivative k2 = eval(scratch, motors);
  advance(k2, dt / 2, scratch, motors);
  const Derivative k3 = eval(scratch, motors);
  advance(k3, dt, scratch, motors);
  const Derivative k4 = eval(scratch, motors);

  const double w = dt / 6.0;
  state_.position += w * (k1.velocity + 2 * k2.velocity + 2 * k3.velocity + k4.velocity);
  state_.velocity += w * (k1.accel + 2 * k2.accel + 2 * k3.accel + k4.accel);
  state_.rotation += w * (k1.rotation_dot + 2 * k2.rotation_dot +
                          2 * k3.rotation_dot + k4.rotation_dot);
  state_.body_rate += w * (k1.body_rate_dot + 2 * k2.body_rate_dot +
                           2 * k3.body_rate_dot + k4.body_rate_dot);
  for (std::size_t i = 0; i < motor_thrust_.size(); ++i) {
    motor_thrust_[i] += w * (k1.motor_dot[i] + 2 * k2.motor_dot[i] +
                             2 * k3.motor_dot[i] + k4.motor_dot[i]);
  }

  state_.rotation = orthonormalized(state_.rotation);

  // Ground plane: full-stop contact, no bounce.
  if (ground_z_ && state_.position.z() <= *ground_z_) {
    state_.position.z() = *ground_z_;
    if (state_.velocity.z() < 0.0) {
      state_.velocity.setZero();
      state_.body_rate.setZero();
    }
  }
}

AttitudeRateLoop::AttitudeRateLoop(const RigidBodyParams& params)
    : AttitudeRateLoop(params, Gains{}) {}

AttitudeRateLoop::AttitudeRateLoop(const RigidBodyParams& params,
                                   const Gains& gains)
    : params_(params), gains_(gains) {}

void AttitudeRateLoop::reset() {
  integrator_.setZero();
}

AllocationResult AttitudeRateLoop::step(const Vec3& body_rate,
                                        const AttitudeRateCommand& cmd,
                                        double dt) {
  const Vec3 error = cmd.body_rate_setpoint - body_rate;
  integrator_ *= std::max(0.0, 1.0 - gains_.integrator_leak * dt);
  integrator_ += error * dt;
  integrator_ = integrator_.cwiseMax(-gains_.integrator_limit)
                    .cwiseMin(gains_.integrator_limit);

  const Vec3 inertia = params_.inertia;
  const Vec3 gyroscopic = body_rate.cross(inertia.cwiseProduct(body_rate));
  const Vec3 torque =
      inertia.cwiseProduct(gains_.rate_p * error + gains_.rate_i * integrator_) +
      gyroscopic;

  const double thrust = std::clamp(cmd.thrust, 0.0, params_.max_total_thrust());
  AllocationResult result = allocate(thrust, torque, params_);
  if (cmd.thrust > params_.max_total_thrust()) {
    result.feasible = false;
  }
  return result;
}

ImuSample sample_imu(const UavState& state, const Vec3& accel_world, double t,
                     const ImuConfig& config, bool damped,
                     std::mt19937_64& rng) {
  ImuSample sample;
  // Specific force: what an accelerometer strapped to the body measures.
  sample.accel =
      state.rotation.transpose() * (accel_world + Vec3(0, 0, kGravity));

  const double gain = damped ? config.damping_attenuation : 1.0;
  const double w1 = kTwoPi * config.rotor_frequency * t;
  const double w2 = kTwoPi * 2.0 * config.rotor_frequency * t;
  for (int axis = 0; axis < 3; ++axis) {
    const double phase = axis * kTwoPi / 3.0;
    sample.accel(axis) += gain * (config.amp_fundamental * std::sin(w1 + phase) +
                                  config.amp_second_harmonic * std::sin(w2 + phase));
    sample.accel(axis) += SeedTree::draw_normal(rng, config.accel_noise_sigma);
  }

  sample.gyro = state.body_rate;
  for (int axis = 0; axis < 3; ++axis) {
    sample.gyro(axis) += SeedTree::draw_normal(rng, config.gyro_noise_sigma);
  }
  return sample;
}

OdometrySource::OdometrySource(std::string id,
                               const OdometrySourceConfig& config,
                               std::mt19937_64 rng)
    : id_(std::move(id)), config_(config), rng_(std::move(rng)) {}

std::optional<OdometryMeasurement> OdometrySource::sample(const UavState& truth,
                                                          double t) {
  const double dropout_draw = SeedTree::draw_uniform(rng_);
  Vec3 position_noise;
  for (int i = 0; i < 3; ++i) {
    position_noise(i) = SeedTree::draw_normal(rng_, config_.position_noise_sigma);
  }
  const double heading_noise =
      SeedTree::draw_normal(rng_, config_.heading_noise_sigma);

  if (config_.kind == OdometryKind::kVioLike) {
    // Random-walk drift: per-axis variance grows as drift_rate^2 * elapsed.
    const double step_sigma = config_.drift_rate * std::sqrt(1.0 / config_.rate);
    for (int i = 0; i < 3; ++i) {
      drift_(i) += SeedTree::draw_normal(rng_, step_sigma);
    }
  }

  if (dropout_draw < config_.dropout_probability) {
    return std::nullopt;
  }

  OdometryMeasurement m;
  m.position = truth.position + drift_ + position_noise;
  m.heading = wrap_heading(heading_of(truth.rotation) + heading_noise);
  m.sample_time = t;
  m.delivery_time = t + config_.latency;
  return m;
}

}  // namespace mstack
