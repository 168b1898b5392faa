#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mstack/controller.hpp"
#include "mstack/plant.hpp"

using namespace mstack;

namespace {

ControllerParams x500_params() {
  ControllerParams p;
  p.mass = 2.5;
  p.max_thrust = 4 * 10.24;
  return p;
}

FullStateReference hover_ref(const Vec3& position, double heading = 0.0) {
  FullStateReference r;
  r.position = position;
  r.heading = heading;
  return r;
}

UavState state_at(const Vec3& position, double heading = 0.0) {
  UavState s;
  s.position = position;
  s.rotation = rot_z(heading);
  return s;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  Mat3 r = q.toRotationMatrix();
  if (std::abs(r(2, 2)) < 0.2) {
    return random_rotation(rng);  // keep thrust direction sane
  }
  if (r(2, 2) < 0.0) {
    r = r * rot_x(3.14159265358979);  // flip body z upward
  }
  return r;
}

}  // namespace

TEST_CASE("gain profiles") {
  const ControllerGains smooth = select_profile("smooth");
  const ControllerGains aggressive = select_profile("aggressive");
  CHECK(aggressive.k_p > smooth.k_p);
  CHECK(aggressive.k_v > smooth.k_v);
  CHECK(aggressive.k_r > smooth.k_r);
  CHECK_THROWS_AS(select_profile("foo"), UnknownProfile);
}

TEST_CASE("hover equilibrium gives T = m g and zero rates") {
  const ControllerParams params = x500_params();
  const ControllerGains gains = select_profile("smooth");
  const Vec3 pos(1, 2, 5);
  const ControllerOutput out =
      compute_control(hover_ref(pos, 0.3), state_at(pos, 0.3), gains, params);
  CHECK(out.command.thrust == doctest::Approx(2.5 * 9.81).epsilon(1e-12));
  CHECK(out.command.body_rate_setpoint.norm() < 1e-9);
  CHECK(out.desired_acceleration.norm() < 1e-12);
}

TEST_CASE("position error below the reference demands more vertical thrust") {
  const ControllerParams params = x500_params();
  const ControllerGains gains = select_profile("smooth");
  const Vec3 ref_pos(0, 0, 5);
  const Vec3 est_pos(0, 0, 4);  // 1 m below
  const ControllerOutput out =
      compute_control(hover_ref(ref_pos), state_at(est_pos), gains, params);
  CHECK(out.command.thrust > 2.5 * 9.81);
  // Pure vertical error: desired thrust axis has no horizontal component.
  CHECK(std::abs(out.desired_rotation.col(2).x()) < 1e-12);
  CHECK(std::abs(out.desired_rotation.col(2).y()) < 1e-12);
}

TEST_CASE("heading offset demands positive body-z rate") {
  const ControllerParams params = x500_params();
  const ControllerGains gains = select_profile("smooth");
  const Vec3 pos(0, 0, 5);
  const ControllerOutput out =
      compute_control(hover_ref(pos, 0.5), state_at(pos, 0.0), gains, params);
  CHECK(out.command.body_rate_setpoint.z() > 0.0);
  CHECK(std::abs(out.command.body_rate_setpoint.z()) >
        5.0 * std::abs(out.command.body_rate_setpoint.x()));
  CHECK(std::abs(out.command.body_rate_setpoint.z()) >
        5.0 * std::abs(out.command.body_rate_setpoint.y()));
  CHECK(out.command.thrust == doctest::Approx(2.5 * 9.81).epsilon(1e-9));
}

TEST_CASE("rate command is zero when the estimate matches the target") {
  const ControllerParams params = x500_params();
  const ControllerGains gains = select_profile("aggressive");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 100; ++i) {
    FullStateReference ref;
    ref.position = Vec3(u(rng), u(rng), 5 + u(rng));
    ref.acceleration = Vec3(u(rng), u(rng), u(rng));
    ref.heading = 2.0 * u(rng);
    UavState est;
    est.position = ref.position;
    // Attitude exactly the controller's own target.
    const Vec3 f = params.mass * (ref.acceleration + Vec3(0, 0, kGravity));
    est.rotation = rotation_from_thrust_heading(f, ref.heading);
    const ControllerOutput out = compute_control(ref, est, gains, params);
    CHECK(out.command.body_rate_setpoint.norm() < 1e-9);
  }
}

TEST_CASE("whole-frame world yaw leaves thrust and body rates invariant") {
  const ControllerParams params = x500_params();
  const ControllerGains gains = select_profile("smooth");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    FullStateReference ref;
    ref.position = Vec3(3 * u(rng), 3 * u(rng), 5);
    ref.velocity = Vec3(u(rng), u(rng), 0.5 * u(rng));
    ref.acceleration = Vec3(u(rng), u(rng), 0.5 * u(rng));
    ref.heading = 2 * u(rng);
    ref.heading_rate = 0.5 * u(rng);
    UavState est;
    est.position = ref.position + Vec3(u(rng), u(rng), u(rng));
    est.velocity = Vec3(u(rng), u(rng), u(rng));
    est.rotation = random_rotation(rng);
    const ControllerOutput base = compute_control(ref, est, gains, params);

    const double alpha = 3.0 * u(rng);
    const Mat3 yaw = rot_z(alpha);
    FullStateReference ref2 = ref;
    ref2.position = yaw * ref.position;
    ref2.velocity = yaw * ref.velocity;
    ref2.acceleration = yaw * ref.acceleration;
    ref2.heading = wrap_heading(ref.heading + alpha);
    UavState est2 = est;
    est2.position = yaw * est.position;
    est2.velocity = yaw * est.velocity;
    est2.rotation = yaw * est.rotation;
    const ControllerOutput rotated = compute_control(ref2, est2, gains, params);

    CHECK(rotated.command.thrust == doctest::Approx(base.command.thrust).epsilon(1e-9));
    CHECK((rotated.command.body_rate_setpoint - base.command.body_rate_setpoint)
              .norm() < 1e-9);
  }
}

TEST_CASE("free-fall demand raises DegenerateForce") {
  const ControllerParams params = x500_params();
  const ControllerGains gains = select_profile("smooth");
  FullStateReference ref;
  ref.position = Vec3(0, 0, 5);
  ref.acceleration = Vec3(0, 0, -kGravity);  // commanded free fall
  CHECK_THROWS_AS(compute_control(ref, state_at(Vec3(0, 0, 5)), gains, params),
                  DegenerateForce);
}

namespace {

// Full closed loop: controller at 100 Hz, rate loop + plant at 1 kHz, perfect
// state estimate. Returns the final position error.
double closed_loop_step_error(const ControllerGains& gains, double step,
                              double t_end) {
  RigidBodyParams body = RigidBodyParams::quad_x(2.5, 0.25);
  body.rotor_max_thrust = 10.24;
  ControllerParams params;
  params.mass = body.mass;
  params.max_thrust = body.max_total_thrust();

  UavState init;
  init.position = Vec3(0, 0, 5);
  MultirotorPlant plant(body, init);
  std::vector<double> trim(4, body.mass * kGravity / 4);
  plant.set_motor_thrust(trim);
  AttitudeRateLoop rate_loop(body);

  const Vec3 target(step, 0, 5);
  FullStateReference ref;
  ref.position = target;

  AttitudeRateCommand cmd;
  cmd.thrust = body.mass * kGravity;
  const int n = static_cast<int>(t_end * 1000);
  for (int i = 0; i < n; ++i) {
    if (i % 10 == 0) {
      const ControllerOutput out =
          compute_control(ref, plant.state(), gains, params);
      cmd = out.command;
    }
    const AllocationResult alloc =
        rate_loop.step(plant.state().body_rate, cmd, 0.001);
    plant.step(alloc.command, 0.001);
  }
  return (plant.state().position - target).norm();
}

}  // namespace

TEST_CASE("closed-loop 10 m step settles below 1 cm by t = 20 s") {
  CHECK(closed_loop_step_error(select_profile("smooth"), 10.0, 20.0) < 0.01);
  CHECK(closed_loop_step_error(select_profile("aggressive"), 10.0, 20.0) < 0.01);
}

TEST_CASE("commanded acceleration is consistent with the plant") {
  // Feeding a_d into a double integrator reproduces the plant trajectory
  // within 5 % RMS over a gentle maneuver. a_d carries no drag term, so the
  // nominal flight uses the light-drag airframe configuration.
  RigidBodyParams body = RigidBodyParams::quad_x(2.5, 0.25);
  body.rotor_max_thrust = 10.24;
  body.drag_coefficient = 0.1;
  ControllerParams params;
  params.mass = body.mass;
  params.max_thrust = body.max_total_thrust();
  const ControllerGains gains = select_profile("smooth");

  UavState init;
  init.position = Vec3(0, 0, 5);
  MultirotorPlant plant(body, init);
  plant.set_motor_thrust(std::vector<double>(4, body.mass * kGravity / 4));
  AttitudeRateLoop rate_loop(body);

  Vec3 integrated_v = Vec3::Zero();
  double err_sq = 0.0;
  double scale_sq = 0.0;
  AttitudeRateCommand cmd;
  cmd.thrust = body.mass * kGravity;
  Vec3 a_d = Vec3::Zero();
  for (int i = 0; i < 20000; ++i) {
    const double t = i * 0.001;
    if (i % 10 == 0) {
      FullStateReference ref;
      ref.position = Vec3(2.0 * std::sin(0.4 * t), 0, 5);
      ref.velocity = Vec3(0.8 * std::cos(0.4 * t), 0, 0);
      ref.acceleration = Vec3(-0.32 * std::sin(0.4 * t), 0, 0);
      const ControllerOutput out =
          compute_control(ref, plant.state(), gains, params);
      cmd = out.command;
      a_d = out.desired_acceleration;
    }
    const Vec3 v_before = plant.state().velocity;
    const AllocationResult alloc =
        rate_loop.step(plant.state().body_rate, cmd, 0.001);
    plant.step(alloc.command, 0.001);
    const Vec3 plant_accel = (plant.state().velocity - v_before) / 0.001;
    if (t > 2.0) {  // skip the spin-up transient
      err_sq += (plant_accel - a_d).squaredNorm();
      scale_sq += std::max(plant_accel.squaredNorm(), 1.0);
    }
    integrated_v += a_d * 0.001;
  }
  CHECK(std::sqrt(err_sq / scale_sq) < 0.05);
}
