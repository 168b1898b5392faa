#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "mstack/plant.hpp"
#include "mstack/rng.hpp"

using namespace mstack;

namespace {

MotorCommand hover_command(const RigidBodyParams& p) {
  MotorCommand cmd;
  cmd.thrust.assign(p.rotor_count(), p.mass * kGravity / p.rotor_count());
  return cmd;
}

// Radix-2 FFT used as the spectral oracle.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n <= 1) {
    return;
  }
  std::vector<std::complex<double>> even(n / 2), odd(n / 2);
  for (std::size_t i = 0; i < n / 2; ++i) {
    even[i] = a[2 * i];
    odd[i] = a[2 * i + 1];
  }
  fft(even);
  fft(odd);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const auto t = std::polar(1.0, -2.0 * std::numbers::pi * k / n) * odd[k];
    a[k] = even[k] + t;
    a[k + n / 2] = even[k] - t;
  }
}

std::vector<double> accel_spectrum(const ImuConfig& cfg, bool damped,
                                   std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  UavState hover;
  std::vector<std::complex<double>> samples(n);
  for (int i = 0; i < n; ++i) {
    const double t = i / cfg.sample_rate;
    const ImuSample s = sample_imu(hover, Vec3::Zero(), t, cfg, damped, rng);
    samples[i] = s.accel.x();
  }
  fft(samples);
  std::vector<double> mag(n / 2);
  for (int i = 0; i < n / 2; ++i) {
    mag[i] = std::abs(samples[i]) / n;
  }
  return mag;
}

}  // namespace

TEST_CASE("hover command from rest holds position once motors are trimmed") {
  RigidBodyParams p = RigidBodyParams::quad_x(2.0, 0.25);
  UavState init;
  init.position = Vec3(0, 0, 5);
  MultirotorPlant plant(p, init);
  plant.set_motor_thrust(hover_command(p).thrust);  // lag pre-settled
  const MotorCommand cmd = hover_command(p);
  for (int i = 0; i < 1000; ++i) {
    plant.step(cmd, 0.001);
  }
  CHECK((plant.state().position - init.position).norm() < 1e-6);
  CHECK(plant.state().velocity.norm() < 1e-6);
}

TEST_CASE("zero command gives free fall after the motor lag dies") {
  RigidBodyParams p = RigidBodyParams::quad_x(2.0, 0.25);
  p.drag_coefficient = 0.0;
  UavState init;
  init.position = Vec3(0, 0, 100);
  MultirotorPlant plant(p, init);
  MotorCommand cmd;
  cmd.thrust.assign(p.rotor_count(), 0.0);
  plant.step(cmd, 0.001);
  // Motors start at zero, so acceleration is pure gravity from t = 0+.
  CHECK(plant.state().velocity.z() == doctest::Approx(-9.81 * 0.001).epsilon(1e-9));
}

TEST_CASE("invalid motor commands are rejected") {
  RigidBodyParams p = RigidBodyParams::quad_x(2.0, 0.25);
  MultirotorPlant plant(p, UavState{});
  MotorCommand wrong;
  wrong.thrust.assign(3, 1.0);
  CHECK_THROWS_AS(plant.step(wrong, 0.001), InvalidCommand);
  MotorCommand negative = hover_command(p);
  negative.thrust[1] = -0.2;
  CHECK_THROWS_AS(plant.step(negative, 0.001), InvalidCommand);
  CHECK_THROWS_AS(plant.step(hover_command(p), 0.01), InvalidCommand);
}

TEST_CASE("allocation reproduces the wrench exactly for quad and coax octo") {
  for (auto params : {RigidBodyParams::quad_x(2.0, 0.25),
                      RigidBodyParams::coax_octo(5.5, 0.28)}) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (int trial = 0; trial < 200; ++trial) {
      const double thrust = params.mass * kGravity * (0.8 + 0.2 * SeedTree::draw_uniform(rng));
      const Vec3 torque(u(rng), u(rng), 0.3 * u(rng));
      const AllocationResult r = allocate(thrust, torque, params);
      REQUIRE(r.feasible);
      double total = 0.0;
      Vec3 tau = Vec3::Zero();
      for (int i = 0; i < params.rotor_count(); ++i) {
        total += r.command.thrust[i];
        tau += params.rotors[i].arm.cross(Vec3(0, 0, r.command.thrust[i]));
        tau.z() += params.rotors[i].spin * params.rotor_moment_constant *
                   r.command.thrust[i];
      }
      CHECK(total == doctest::Approx(thrust).epsilon(1e-9));
      CHECK((tau - torque).norm() < 1e-9);
    }
  }
}

TEST_CASE("allocation symmetry cases") {
  RigidBodyParams quad = RigidBodyParams::quad_x(2.0, 0.25);
  const double mg = quad.mass * kGravity;
  const AllocationResult hover = allocate(mg, Vec3::Zero(), quad);
  for (double t : hover.command.thrust) {
    CHECK(t == doctest::Approx(mg / 4).epsilon(1e-12));
  }

  // Pure positive yaw: CCW rotors (+ spin) rise, CW rotors sink, symmetric.
  const AllocationResult yaw = allocate(mg, Vec3(0, 0, 0.1), quad);
  for (int i = 0; i < 4; ++i) {
    const double delta = yaw.command.thrust[i] - mg / 4;
    CHECK(std::abs(delta) > 1e-6);
    CHECK(delta * quad.rotors[i].spin > 0.0);
    CHECK(std::abs(std::abs(delta) - std::abs(yaw.command.thrust[0] - mg / 4)) <
          1e-12);
  }

  RigidBodyParams octo = RigidBodyParams::coax_octo(5.5, 0.28);
  const double mg8 = octo.mass * kGravity;
  const AllocationResult oh = allocate(mg8, Vec3::Zero(), octo);
  for (double t : oh.command.thrust) {
    CHECK(t == doctest::Approx(mg8 / 8).epsilon(1e-12));
  }
}

TEST_CASE("degenerate rotor geometry is rejected") {
  RigidBodyParams p = RigidBodyParams::quad_x(2.0, 0.25);
  for (auto& rotor : p.rotors) {
    rotor.arm = Vec3::Zero();  // no roll/pitch authority
  }
  CHECK_THROWS_AS(allocate(10.0, Vec3(0.1, 0, 0), p), RankDeficientGeometry);
}

TEST_CASE("pure yaw torque spins only the body z-axis") {
  RigidBodyParams p = RigidBodyParams::quad_x(2.0, 0.25);
  p.drag_coefficient = 0.0;
  UavState init;
  MultirotorPlant plant(p, init);
  const AllocationResult r = allocate(0.0, Vec3(0, 0, 0.2), p);
  // Thrust-free yaw allocation needs negative thrusts; instead verify through
  // the dynamics with a hover + yaw command.
  const AllocationResult hover_yaw = allocate(p.mass * kGravity, Vec3(0, 0, 0.2), p);
  plant.set_motor_thrust(hover_yaw.command.thrust);
  plant.step(hover_yaw.command, 0.001);
  CHECK(std::abs(plant.state().body_rate.x()) < 1e-9);
  CHECK(std::abs(plant.state().body_rate.y()) < 1e-9);
  CHECK(plant.state().body_rate.z() > 0.0);
  (void)r;
}

TEST_CASE("attitude rate loop equilibrium and yaw response") {
  RigidBodyParams p = RigidBodyParams::quad_x(2.0, 0.25);
  AttitudeRateLoop loop(p);
  const double mg = p.mass * kGravity;

  AttitudeRateCommand cmd;
  cmd.thrust = mg;
  cmd.body_rate_setpoint = Vec3::Zero();
  const AllocationResult at_rest = loop.step(Vec3::Zero(), cmd, 0.001);
  for (double t : at_rest.command.thrust) {
    CHECK(t == doctest::Approx(mg / 4).epsilon(1e-9));
  }

  AttitudeRateLoop loop2(p);
  cmd.body_rate_setpoint = Vec3(0, 0, 1.0);
  const AllocationResult yawing = loop2.step(Vec3::Zero(), cmd, 0.001);
  for (int i = 0; i < 4; ++i) {
    const double delta = yawing.command.thrust[i] - mg / 4;
    CHECK(delta * p.rotors[i].spin > 0.0);  // same signs as pure-yaw allocation
  }

  AttitudeRateLoop loop3(p);
  cmd.body_rate_setpoint = Vec3::Zero();
  cmd.thrust = p.max_total_thrust() * 2.0;
  const AllocationResult clamped = loop3.step(Vec3::Zero(), cmd, 0.001);
  CHECK_FALSE(clamped.feasible);
  for (double t : clamped.command.thrust) {
    CHECK(t <= p.rotor_max_thrust + 1e-12);
  }
}

TEST_CASE("closed rate loop converges to the setpoint") {
  RigidBodyParams p = RigidBodyParams::quad_x(2.5, 0.25);
  MultirotorPlant plant(p, UavState{});
  plant.set_motor_thrust(hover_command(p).thrust);
  AttitudeRateLoop loop(p);
  AttitudeRateCommand cmd;
  cmd.thrust = p.mass * kGravity;
  cmd.body_rate_setpoint = Vec3(0.3, -0.2, 0.5);
  for (int i = 0; i < 1500; ++i) {
    const auto r = loop.step(plant.state().body_rate, cmd, 0.001);
    plant.step(r.command, 0.001);
  }
  CHECK((plant.state().body_rate - cmd.body_rate_setpoint).norm() < 0.02);
}

TEST_CASE("rotation stays orthonormal and laterally clean over many steps") {
  RigidBodyParams p = RigidBodyParams::quad_x(2.0, 0.25);
  UavState init;
  init.position = Vec3(1, 2, 5);
  MultirotorPlant plant(p, init);
  plant.set_motor_thrust(hover_command(p).thrust);
  MotorCommand wobble = hover_command(p);
  for (int i = 0; i < 100000; ++i) {
    // Small thrust modulation keeps the attitude moving.
    const double w = 0.02 * std::sin(i * 0.003);
    MotorCommand cmd = wobble;
    cmd.thrust[0] += w;
    cmd.thrust[1] -= w;
    plant.step(cmd, 0.001);
    if (i % 10000 == 0) {
      CHECK(is_rotation(plant.state().rotation, 1e-9));
    }
  }
  CHECK(is_rotation(plant.state().rotation, 1e-9));

  // Pure hover: no spurious lateral force, ever.
  MultirotorPlant still(p, init);
  still.set_motor_thrust(hover_command(p).thrust);
  for (int i = 0; i < 20000; ++i) {
    still.step(hover_command(p), 0.001);
  }
  CHECK(still.state().position.x() == doctest::Approx(1.0));
  CHECK(still.state().position.y() == doctest::Approx(2.0));
}

TEST_CASE("simulation is bit-reproducible for a fixed seed") {
  const auto run = [&] {
    RigidBodyParams p = RigidBodyParams::quad_x(2.0, 0.25);
    MultirotorPlant plant(p, UavState{});
    plant.set_motor_thrust(hover_command(p).thrust);
    std::mt19937_64 rng(99);
    ImuConfig cfg;
    double checksum = 0.0;
    for (int i = 0; i < 5000; ++i) {
      MotorCommand cmd = hover_command(p);
      cmd.thrust[i % 4] += 0.01;
      plant.step(cmd, 0.001);
      const ImuSample s =
          sample_imu(plant.state(), plant.inertial_acceleration(), i * 1e-3,
                     cfg, false, rng);
      checksum += s.accel.sum() + plant.state().position.sum();
    }
    return checksum;
  };
  CHECK(run() == run());
}

TEST_CASE("imu at rest reads +g on the body z-axis") {
  ImuConfig cfg;
  cfg.accel_noise_sigma = 0.0;
  cfg.gyro_noise_sigma = 0.0;
  cfg.amp_fundamental = 0.0;
  cfg.amp_second_harmonic = 0.0;
  std::mt19937_64 rng(1);
  UavState hover;
  const ImuSample s = sample_imu(hover, Vec3::Zero(), 0.123, cfg, false, rng);
  CHECK(s.accel.x() == doctest::Approx(0.0));
  CHECK(s.accel.y() == doctest::Approx(0.0));
  CHECK(s.accel.z() == doctest::Approx(9.81));
}

TEST_CASE("vibration peaks sit at the rotor frequency and its second harmonic") {
  ImuConfig cfg;
  cfg.sample_rate = 1024.0;
  cfg.rotor_frequency = 100.0;
  cfg.accel_noise_sigma = 0.02;
  const int n = 1024;

  const auto mag = accel_spectrum(cfg, false, 42, n);
  // 1 Hz bins: peaks at exactly bins 100 and 200.
  double floor_sum = 0.0;
  int floor_count = 0;
  for (int i = 5; i < n / 2; ++i) {
    if (std::abs(i - 100) <= 2 || std::abs(i - 200) <= 2) {
      continue;
    }
    floor_sum += mag[i];
    ++floor_count;
  }
  const double floor = floor_sum / floor_count;
  CHECK(mag[100] > 10.0 * floor);
  CHECK(mag[200] > 10.0 * floor);

  const auto damped = accel_spectrum(cfg, true, 42, n);
  CHECK(damped[100] == doctest::Approx(cfg.damping_attenuation * mag[100]).epsilon(0.10));
  CHECK(damped[200] == doctest::Approx(cfg.damping_attenuation * mag[200]).epsilon(0.10));
}

TEST_CASE("odometry without noise reproduces the truth") {
  OdometrySourceConfig cfg;
  cfg.position_noise_sigma = 0.0;
  cfg.heading_noise_sigma = 0.0;
  cfg.dropout_probability = 0.0;
  cfg.latency = 0.05;
  OdometrySource src("gnss", cfg, std::mt19937_64(5));
  UavState truth;
  truth.position = Vec3(3, -1, 7);
  truth.rotation = rot_z(0.4);
  const auto m = src.sample(truth, 1.0);
  REQUIRE(m.has_value());
  CHECK((m->position - truth.position).norm() == doctest::Approx(0.0));
  CHECK(m->heading == doctest::Approx(0.4));
  CHECK(m->delivery_time == doctest::Approx(1.05));
}

TEST_CASE("dropout probability one drops everything") {
  OdometrySourceConfig cfg;
  cfg.dropout_probability = 1.0;
  OdometrySource src("gnss", cfg, std::mt19937_64(6));
  UavState truth;
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(src.sample(truth, i * 0.1).has_value());
  }
}

TEST_CASE("vio drift follows the random-walk scaling law") {
  // After T seconds at rate r, per-axis drift variance is drift_rate^2 * T;
  // the expected 3D magnitude follows the chi-3 mean.
  OdometrySourceConfig cfg;
  cfg.kind = OdometryKind::kVioLike;
  cfg.rate = 30.0;
  cfg.drift_rate = 0.01;
  cfg.position_noise_sigma = 0.0;
  cfg.heading_noise_sigma = 0.0;

  const double T = 100.0;
  const int n_samples = static_cast<int>(T * cfg.rate);
  const int seeds = 1000;
  double mean_mag = 0.0;
  UavState truth;
  for (int seed = 0; seed < seeds; ++seed) {
    OdometrySource src("vio", cfg, std::mt19937_64(1000 + seed));
    Vec3 last = Vec3::Zero();
    for (int i = 0; i < n_samples; ++i) {
      const auto m = src.sample(truth, i / cfg.rate);
      REQUIRE(m.has_value());
      last = m->position;
    }
    mean_mag += last.norm();
  }
  mean_mag /= seeds;
  const double sigma = cfg.drift_rate * std::sqrt(T);  // per-axis
  const double chi3_mean = sigma * 2.0 * std::sqrt(2.0 / std::numbers::pi);
  CHECK(mean_mag == doctest::Approx(chi3_mean).epsilon(0.10));
}

TEST_CASE("ground plane stops descent") {
  RigidBodyParams p = RigidBodyParams::quad_x(2.0, 0.25);
  UavState init;
  init.position = Vec3(0, 0, 0.3);
  MultirotorPlant plant(p, init, 0.0);
  MotorCommand off;
  off.thrust.assign(4, 0.0);
  for (int i = 0; i < 2000; ++i) {
    plant.step(off, 0.001);
  }
  CHECK(plant.state().position.z() == doctest::Approx(0.0));
  CHECK(plant.state().velocity.norm() == doctest::Approx(0.0));
}
