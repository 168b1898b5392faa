#include "mstack/estimator.hpp"

#include <cmath>

namespace mstack {

Estimator::Estimator(const EstimatorConfig& config) : config_(config) {
  for (auto& axis : axis_) {
    axis.p00 = config_.initial_position_var;
    axis.p11 = config_.initial_velocity_var;
  }
  heading_var_ = config_.initial_heading_var;
}

void Estimator::register_source(const std::string& id, double position_sigma,
                                double heading_sigma) {
  sources_[id] = Source{position_sigma, heading_sigma};
  if (active_source_.empty()) {
    active_source_ = id;
  }
}

void Estimator::initialize(const Vec3& position, double heading) {
  for (int i = 0; i < 3; ++i) {
    axis_[i].x = position(i);
    axis_[i].v = 0.0;
    axis_[i].p00 = config_.initial_position_var;
    axis_[i].p01 = 0.0;
    axis_[i].p11 = config_.initial_velocity_var;
  }
  heading_ = wrap_heading(heading);
  heading_var_ = config_.initial_heading_var;
  if (!imu_seen_) {
    // The gyro integral needs the right initial yaw or every subsequent tilt
    // reads with a rotated azimuth.
    imu_attitude_ = rot_z(heading_);
  }
  initialized_ = true;
}

void Estimator::predict(const Vec3& commanded_accel, double heading_rate,
                        double dt) {
  const Vec3 accel =
      commanded_accel.cwiseMax(-config_.accel_input_limit)
          .cwiseMin(config_.accel_input_limit);
  last_accel_cmd_ = accel;
  const double q = config_.accel_process_sigma * config_.accel_process_sigma;
  for (int i = 0; i < 3; ++i) {
    AxisFilter& f = axis_[i];
    const double a = accel(i);
    f.x += f.v * dt + 0.5 * a * dt * dt;
    f.v += a * dt;
    // P <- F P F' + Q with F = [[1, dt], [0, 1]] and white-acceleration Q.
    const double p00 = f.p00 + dt * (f.p01 + f.p01) + dt * dt * f.p11;
    const double p01 = f.p01 + dt * f.p11;
    const double p11 = f.p11;
    f.p00 = p00 + 0.25 * dt * dt * dt * dt * q;
    f.p01 = p01 + 0.5 * dt * dt * dt * q;
    f.p11 = p11 + dt * dt * q;
  }
  heading_ = wrap_heading(heading_ + heading_rate * dt);
  const double qh = config_.heading_rate_process_sigma;
  heading_var_ += qh * qh * dt * dt;
}

void Estimator::correct(const std::string& source_id,
                        const PoseMeasurement& raw) {
  auto it = sources_.find(source_id);
  if (it == sources_.end()) {
    throw UnknownSource("odometry source '" + source_id + "' not registered");
  }
  Source& src = it->second;
  src.last_raw_position = raw.position;
  src.last_raw_heading = raw.heading;

  if (!initialized_) {
    // First measurement bootstraps the filter; the bootstrapping source
    // defines the reference frame (zero offset).
    src.seen = true;
    src.offset.setZero();
    src.heading_offset = 0.0;
    active_source_ = source_id;
    initialize(raw.position, raw.heading);
    return;
  }
  src.seen = true;

  // Offsets are re-estimated only by switch_source; until then a source in a
  // disagreeing frame bounces off the innovation gate.
  const Vec3 aligned = raw.position + src.offset;
  const double aligned_heading = wrap_heading(raw.heading + src.heading_offset);

  // Gate on the whole measurement: any axis beyond gate_sigma (plus the
  // absolute floor) rejects it.
  const double r = src.position_sigma * src.position_sigma;
  const double floor_sq = config_.gate_position_floor * config_.gate_position_floor;
  for (int i = 0; i < 3; ++i) {
    const double s = axis_[i].p00 + r;
    const double innovation = aligned(i) - axis_[i].x;
    if (innovation * innovation >
        config_.gate_sigma * config_.gate_sigma * s + floor_sq) {
      ++rejected_;
      return;
    }
  }
  const double rh = src.heading_sigma * src.heading_sigma;
  const double heading_innovation = wrap_heading(aligned_heading - heading_);
  if (heading_innovation * heading_innovation >
      config_.gate_sigma * config_.gate_sigma * (heading_var_ + rh) +
          config_.gate_heading_floor * config_.gate_heading_floor) {
    ++rejected_;
    return;
  }

  for (int i = 0; i < 3; ++i) {
    AxisFilter& f = axis_[i];
    const double s = f.p00 + r;
    const double k0 = f.p00 / s;
    const double k1 = f.p01 / s;
    const double innovation = aligned(i) - f.x;
    f.x += k0 * innovation;
    f.v += k1 * innovation;
    const double p00 = (1.0 - k0) * f.p00;
    const double p01 = (1.0 - k0) * f.p01;
    const double p11 = f.p11 - k1 * f.p01;
    f.p00 = p00;
    f.p01 = p01;
    f.p11 = p11;
  }
  const double sh = heading_var_ + rh;
  const double kh = heading_var_ / sh;
  heading_ = wrap_heading(heading_ + kh * heading_innovation);
  heading_var_ *= 1.0 - kh;
}

void Estimator::switch_source(const std::string& source_id) {
  auto it = sources_.find(source_id);
  if (it == sources_.end()) {
    throw UnknownSource("odometry source '" + source_id + "' not registered");
  }
  Source& src = it->second;
  if (!src.seen) {
    throw SourceNeverSeen("source '" + source_id +
                          "' has not produced a measurement yet");
  }
  // Re-align the new owner's frame so the fused output is continuous at the
  // switch instant.
  src.offset = position() - src.last_raw_position;
  src.heading_offset = wrap_heading(heading_ - src.last_raw_heading);
  active_source_ = source_id;
}

Vec3 Estimator::source_offset(const std::string& source_id) const {
  auto it = sources_.find(source_id);
  if (it == sources_.end()) {
    throw UnknownSource("odometry source '" + source_id + "' not registered");
  }
  return it->second.offset;
}

double Estimator::source_heading_offset(const std::string& source_id) const {
  auto it = sources_.find(source_id);
  if (it == sources_.end()) {
    throw UnknownSource("odometry source '" + source_id + "' not registered");
  }
  return it->second.heading_offset;
}

Vec3 Estimator::position() const {
  return {axis_[0].x, axis_[1].x, axis_[2].x};
}

Vec3 Estimator::velocity() const {
  return {axis_[0].v, axis_[1].v, axis_[2].v};
}

double Estimator::heading() const {
  return heading_;
}

Mat3 Estimator::position_covariance() const {
  Mat3 cov = Mat3::Zero();
  for (int i = 0; i < 3; ++i) {
    cov(i, i) = axis_[i].p00;
  }
  return cov;
}

double Estimator::heading_variance() const {
  return heading_var_;
}

void Estimator::feed_imu(const Vec3& gyro, const Vec3& accel, double dt) {
  last_gyro_ = gyro;
  imu_attitude_ =
      orthonormalized(imu_attitude_ * (Mat3::Identity() + hat(gyro * dt)));
  const double magnitude = accel.norm();
  if (magnitude > 0.5 * kGravity && magnitude < 1.5 * kGravity) {
    // Pull the predicted body-frame up-direction toward the measured one.
    const Vec3 measured_up = accel / magnitude;
    const Vec3 predicted_up = imu_attitude_.transpose() * Vec3(0, 0, 1);
    const Vec3 delta = config_.tilt_correction_gain * dt *
                       measured_up.cross(predicted_up);
    imu_attitude_ = orthonormalized(imu_attitude_ * (Mat3::Identity() + hat(delta)));
  }
  // The gyro integral's yaw is unobservable from gravity; keep it welded to
  // the fused heading so the tilt azimuth stays in the right frame.
  if (initialized_) {
    const Vec3 bx = imu_attitude_.col(0);
    if (std::hypot(bx.x(), bx.y()) > 1e-6) {
      const double imu_heading = std::atan2(bx.y(), bx.x());
      const double yaw_err = wrap_heading(heading_ - imu_heading);
      imu_attitude_ =
          rot_z(config_.tilt_correction_gain * dt * yaw_err) * imu_attitude_;
    }
  }
  imu_seen_ = true;
}

UavState Estimator::get_state() const {
  if (!initialized_) {
    throw NotInitialized("estimator has no measurement yet");
  }
  UavState s;
  s.position = position();
  s.velocity = velocity();
  // Body z-direction from the IMU tilt when available, otherwise from the
  // commanded acceleration; heading always from the fused filter.
  Vec3 thrust_dir = imu_seen_ ? Vec3(imu_attitude_ * Vec3(0, 0, 1))
                              : Vec3(last_accel_cmd_ + Vec3(0, 0, kGravity));
  if (thrust_dir.norm() > 1e-6 && std::abs(thrust_dir.normalized().z()) > 1e-3) {
    s.rotation = rotation_from_thrust_heading(thrust_dir, heading_);
  } else {
    s.rotation = rot_z(heading_);
  }
  s.body_rate = last_gyro_;
  return s;
}

}  // namespace mstack
