#include "mstack/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "mstack/wire.hpp"

namespace mstack {

namespace {

// Steady-state LQR gain for a small integrator chain, from iterating the
// Riccati recursion to its fixed point. The tracker applies this feedback
// inside a limiter that enforces the constraint envelope, so the quadratic
// cost needs no constraint terms.
template <int S>
Eigen::Matrix<double, 1, S> riccati_gain(const Eigen::Matrix<double, S, S>& a,
                                         const Eigen::Matrix<double, S, 1>& b,
                                         const Eigen::Matrix<double, S, S>& q,
                                         double r) {
  using MatS = Eigen::Matrix<double, S, S>;
  MatS p = q;
  Eigen::Matrix<double, 1, S> k = Eigen::Matrix<double, 1, S>::Zero();
  for (int i = 0; i < 10000; ++i) {
    k = (b.transpose() * p * a) / (r + (b.transpose() * p * b)(0, 0));
    const MatS next = q + a.transpose() * p * (a - b * k);
    if ((next - p).cwiseAbs().maxCoeff() < 1e-13) {
      p = next;
      break;
    }
    p = next;
  }
  return k;
}

}  // namespace

std::vector<std::uint8_t> PredictedTrajectory::encode() const {
  std::vector<std::uint8_t> out;
  out.reserve(17 + points.size() * 12);
  wire::put_u16(out, uav_id);
  wire::put_u8(out, static_cast<std::uint8_t>(std::clamp(priority, 0, 255)));
  wire::put_f64(out, start_time);
  wire::put_f32(out, static_cast<float>(dt));
  wire::put_u16(out, static_cast<std::uint16_t>(points.size()));
  for (const auto& p : points) {
    wire::put_f32(out, static_cast<float>(p.x()));
    wire::put_f32(out, static_cast<float>(p.y()));
    wire::put_f32(out, static_cast<float>(p.z()));
  }
  return out;
}

PredictedTrajectory PredictedTrajectory::decode(
    std::span<const std::uint8_t> data) {
  wire::Reader reader(data);
  PredictedTrajectory t;
  t.uav_id = reader.u16();
  t.priority = reader.u8();
  t.start_time = reader.f64();
  t.dt = reader.f32();
  const int count = reader.u16();
  t.points.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double x = reader.f32();
    const double y = reader.f32();
    const double z = reader.f32();
    t.points.emplace_back(x, y, z);
  }
  if (!reader.done()) {
    throw Error("trailing bytes in trajectory record");
  }
  return t;
}

Tracker::Tracker(UavId uav_id, int priority,
                 const TrackerConstraints& constraints)
    : Tracker(uav_id, priority, constraints, Options{}) {}

Tracker::Tracker(UavId uav_id, int priority,
                 const TrackerConstraints& constraints, const Options& options)
    : uav_id_(uav_id),
      priority_(priority),
      constraints_(constraints),
      options_(options) {
  // Jerk-input triple integrator per translational axis. Only the Q/R ratio
  // shapes the gain; R = omega^-6 puts the closed-loop corner near omega.
  const double dt = options_.output_dt;
  const double omega = 2.0;  // rad/s
  Eigen::Matrix3d a3;
  a3 << 1.0, dt, 0.5 * dt * dt,
        0.0, 1.0, dt,
        0.0, 0.0, 1.0;
  const Eigen::Vector3d b3(dt * dt * dt / 6.0, 0.5 * dt * dt, dt);
  Eigen::Matrix3d q3 = Eigen::Matrix3d::Zero();
  q3(0, 0) = 1.0;
  q3(1, 1) = 0.3;  // velocity weight damps the braking tail out of cruise
  gain_axis_ = riccati_gain<3>(a3, b3, q3, std::pow(omega, -6.0));

  // Acceleration-input double integrator for heading.
  const double omega_h = 2.5;  // rad/s
  Eigen::Matrix2d a2;
  a2 << 1.0, dt,
        0.0, 1.0;
  const Eigen::Vector2d b2(0.5 * dt * dt, dt);
  Eigen::Matrix2d q2 = Eigen::Matrix2d::Zero();
  q2(0, 0) = 1.0;
  gain_heading_ = riccati_gain<2>(a2, b2, q2, std::pow(omega_h, -4.0));
}

void Tracker::set_reference(const ReferenceCommand& cmd) {
  reference_ = cmd;
  reference_.heading = wrap_heading(cmd.heading);
  reference_set_ = true;
}

double Tracker::axis_v_limit(int axis) const {
  return axis < 2 ? constraints_.v_max_h : constraints_.v_max_v;
}

double Tracker::axis_a_limit(int axis) const {
  return axis < 2 ? constraints_.a_max_h : constraints_.a_max_v;
}

void Tracker::step_translation(AxisState state[3], const Vec3& target,
                               const Eigen::Matrix<double, 1, 3>& gain,
                               const TrackerConstraints& c, double speed_scale,
                               double dt) {
  double v_next[3];
  double a_next[3];
  for (int i = 0; i < 3; ++i) {
    const double v_full = i < 2 ? c.v_max_h : c.v_max_v;
    const double v_lim = i < 2 ? v_full * speed_scale : v_full;
    const double a_lim = i < 2 ? c.a_max_h : c.a_max_v;
    // LQR feedback in error coordinates, clamped to the jerk budget.
    const double jerk_cmd = -(gain(0) * (state[i].p - target(i)) +
                              gain(1) * state[i].v + gain(2) * state[i].a);
    const double j = std::clamp(jerk_cmd, -c.j_max, c.j_max);
    double a = std::clamp(state[i].a + j * dt, -a_lim, a_lim);
    // Braking envelope: from (v, a) the rate can still be stopped inside the
    // limit using jerk-bounded braking.
    const double a_hi =
        std::sqrt(std::max(0.0, 2.0 * c.j_max * (v_lim - state[i].v)));
    const double a_lo =
        -std::sqrt(std::max(0.0, 2.0 * c.j_max * (state[i].v + v_lim)));
    a = std::clamp(a, a_lo, a_hi);
    double v = state[i].v + 0.5 * (state[i].a + a) * dt;
    // Hard bound; never jumps below the current speed so braking stays smooth.
    const double bound = std::max(v_lim, std::min(std::abs(state[i].v), v_full));
    v = std::clamp(v, -bound, bound);
    a_next[i] = a;
    v_next[i] = v;
  }
  // Horizontal speed is bounded as a norm as well as per axis.
  const double v_full_h = c.v_max_h;
  const double v_lim_h = v_full_h * speed_scale;
  const double n = std::hypot(v_next[0], v_next[1]);
  const double n_cur = std::hypot(state[0].v, state[1].v);
  const double n_bound = std::max(v_lim_h, std::min(n_cur, v_full_h));
  if (n > n_bound && n > 0.0) {
    const double scale = n_bound / n;
    v_next[0] *= scale;
    v_next[1] *= scale;
  }
  for (int i = 0; i < 3; ++i) {
    state[i].p += 0.5 * (state[i].v + v_next[i]) * dt;
    state[i].v = v_next[i];
    state[i].a = a_next[i];
  }
}

FullStateReference Tracker::update(const UavState& estimate, double now) {
  if (!initialized_) {
    for (int i = 0; i < 3; ++i) {
      axis_[i].p = estimate.position(i);
      axis_[i].v = estimate.velocity(i);
      axis_[i].a = 0.0;
    }
    heading_ = heading_of(estimate.rotation);
    heading_rate_ = 0.0;
    if (!reference_set_) {
      reference_.position = estimate.position;
      reference_.heading = heading_;
    }
    initialized_ = true;
  }
  now_ = now;
  evaluate_conflicts(now);
  advance_output_tick();

  FullStateReference out;
  out.position = Vec3(axis_[0].p, axis_[1].p, axis_[2].p);
  out.velocity = Vec3(axis_[0].v, axis_[1].v, axis_[2].v);
  out.acceleration = Vec3(axis_[0].a, axis_[1].a, axis_[2].a);
  out.heading = heading_;
  out.heading_rate = heading_rate_;
  return out;
}

void Tracker::advance_output_tick() {
  const double dt = options_.output_dt;
  const Vec3 target(reference_.position.x(), reference_.position.y(),
                    reference_.position.z() + altitude_bias_);
  step_translation(axis_, target, gain_axis_, constraints_, speed_scale_, dt);

  const double heading_target =
      heading_ + wrap_heading(reference_.heading - heading_);
  const double accel_cmd = -(gain_heading_(0) * (heading_ - heading_target) +
                             gain_heading_(1) * heading_rate_);
  const double ha =
      std::clamp(accel_cmd, -options_.heading_accel_max, options_.heading_accel_max);
  double rate = heading_rate_ + ha * dt;
  rate = std::clamp(rate, -constraints_.heading_rate_max,
                    constraints_.heading_rate_max);
  heading_ = wrap_heading(heading_ + 0.5 * (heading_rate_ + rate) * dt);
  heading_rate_ = rate;
}

std::vector<Vec3> Tracker::rollout(int npoints) const {
  AxisState state[3] = {axis_[0], axis_[1], axis_[2]};
  const Vec3 target(reference_.position.x(), reference_.position.y(),
                    reference_.position.z() + altitude_bias_);
  std::vector<Vec3> points;
  points.reserve(npoints);
  points.emplace_back(state[0].p, state[1].p, state[2].p);
  const int substeps = std::max(
      1, static_cast<int>(std::lround(options_.horizon_dt / options_.output_dt)));
  for (int k = 0; k + 1 < npoints; ++k) {
    for (int s = 0; s < substeps; ++s) {
      step_translation(state, target, gain_axis_, constraints_, speed_scale_,
                       options_.output_dt);
    }
    points.emplace_back(state[0].p, state[1].p, state[2].p);
  }
  return points;
}

PredictedTrajectory Tracker::predicted_trajectory(double now) const {
  if (!initialized_) {
    throw NotInitialized("tracker has no state yet");
  }
  PredictedTrajectory t;
  t.uav_id = uav_id_;
  t.priority = priority_;
  t.start_time = now;
  t.dt = options_.horizon_dt;
  t.points = rollout(options_.horizon);
  return t;
}

void Tracker::incorporate_neighbor(const PredictedTrajectory& trajectory,
                                   const AvoidanceConfig& config) {
  avoidance_config_ = config;
  if (trajectory.points.size() < 2 || trajectory.dt <= 0.0) {
    ++stale_dropped_;
    return;
  }
  if (initialized_ && now_ - trajectory.start_time > options_.stale_cutoff) {
    ++stale_dropped_;
    return;
  }
  auto it = neighbors_.find(trajectory.uav_id);
  if (it != neighbors_.end() &&
      it->second.trajectory.start_time > trajectory.start_time) {
    return;  // keep the newer record
  }
  neighbors_[trajectory.uav_id] = NeighborRecord{trajectory};
}

void Tracker::evaluate_conflicts(double now) {
  if (!avoidance_config_.enabled) {
    conflicts_.clear();
    altitude_bias_ = 0.0;
    speed_scale_ = 1.0;
    return;
  }
  const std::vector<Vec3> own = rollout(options_.horizon);
  for (const auto& [id, record] : neighbors_) {
    const auto& traj = record.trajectory;
    if (traj.priority >= priority_) {
      continue;  // only yield to higher-priority traffic
    }
    if (now - traj.start_time > options_.stale_cutoff) {
      continue;  // no fresh evidence; hold the current decision
    }
    bool overlap = false;
    bool conflict = false;
    for (std::size_t i = 0; i < own.size(); ++i) {
      const double t = now + static_cast<double>(i) * options_.horizon_dt;
      const long j = std::lround((t - traj.start_time) / traj.dt);
      if (j < 0 || j >= static_cast<long>(traj.points.size())) {
        continue;
      }
      overlap = true;
      const double dx = own[i].x() - traj.points[j].x();
      const double dy = own[i].y() - traj.points[j].y();
      if (std::hypot(dx, dy) < avoidance_config_.trigger_radius) {
        conflict = true;
        break;
      }
    }
    if (!overlap) {
      continue;
    }
    if (conflict) {
      auto& rec = conflicts_[id];
      rec.last_conflict_seen = now;
      rec.clearing = false;
    } else {
      auto it = conflicts_.find(id);
      if (it != conflicts_.end()) {
        if (!it->second.clearing) {
          it->second.clearing = true;
          it->second.clear_evidence_start = now;
        } else if (now - it->second.clear_evidence_start >= options_.clear_hold) {
          conflicts_.erase(it);
        }
      }
    }
  }
  altitude_bias_ =
      avoidance_config_.altitude_offset * static_cast<double>(conflicts_.size());
  speed_scale_ = conflicts_.empty() ? 1.0 : 0.5;
}

}  // namespace mstack
