#include "mstack/mission.hpp"

#include <algorithm>
#include <cmath>

#include "mstack/wire.hpp"

namespace mstack {

namespace {
constexpr double kArrivalHold = 1.0;      // s within tolerance before advancing
constexpr double kTakeoffTolerance = 0.3; // m
constexpr double kDescentRate = 0.5;      // m/s
constexpr double kTouchdownBand = 0.05;   // m above ground counts as landed
}  // namespace

Mission::Mission(UavId uav_id, double takeoff_altitude,
                 std::vector<Waypoint> waypoints)
    : uav_id_(uav_id),
      takeoff_altitude_(takeoff_altitude),
      waypoints_(std::move(waypoints)) {}

void Mission::arm() {
  if (status_ == MissionStatus::kIdle) {
    status_ = MissionStatus::kArmed;
  }
}

void Mission::trigger_failsafe() {
  if (status_ == MissionStatus::kDone) {
    return;
  }
  status_ = MissionStatus::kFailsafe;
  failsafe_latched_ = false;  // capture hold point on the next step
}

std::optional<ReferenceCommand> Mission::step(const UavState& estimate,
                                              double now, double ground_z) {
  if (status_ == MissionStatus::kIdle || status_ == MissionStatus::kDone) {
    return std::nullopt;
  }

  if (status_ == MissionStatus::kFailsafe) {
    if (!failsafe_latched_) {
      active_reference_.position = estimate.position;
      active_reference_.heading = heading_of(estimate.rotation);
      failsafe_descent_start_ = now;
      failsafe_z0_ = estimate.position.z();
      failsafe_latched_ = true;
    }
    active_reference_.position.z() = std::max(
        ground_z, failsafe_z0_ - kDescentRate * (now - failsafe_descent_start_));
    return active_reference_;
  }

  if (status_ == MissionStatus::kArmed) {
    status_ = MissionStatus::kExecuting;
    start_position_ = estimate.position;
    start_heading_ = heading_of(estimate.rotation);
    have_start_ = true;
    phase_ = 0;
    inside_since_ = -1.0;
  }

  double tolerance = kTakeoffTolerance;
  if (phase_ == 0) {
    active_reference_.position =
        Vec3(start_position_.x(), start_position_.y(),
             ground_z + takeoff_altitude_);
    active_reference_.heading = start_heading_;
  } else if (phase_ <= static_cast<int>(waypoints_.size())) {
    const Waypoint& wp = waypoints_[phase_ - 1];
    active_reference_ = wp.command;
    tolerance = wp.tolerance;
  } else {
    // Land: ramp the reference down from the land-entry point.
    active_reference_.position.z() = std::max(
        ground_z, land_z0_ - kDescentRate * (now - land_start_time_));
    if (estimate.position.z() <= ground_z + kTouchdownBand) {
      status_ = MissionStatus::kDone;
      return std::nullopt;
    }
    return active_reference_;
  }

  const double error = (estimate.position - active_reference_.position).norm();
  if (error <= tolerance) {
    if (inside_since_ < 0.0) {
      inside_since_ = now;
    } else if (now - inside_since_ >= kArrivalHold) {
      if (phase_ >= 1 && phase_ <= static_cast<int>(waypoints_.size())) {
        arrival_pending_ = true;
      }
      ++phase_;
      inside_since_ = -1.0;
      if (phase_ == land_phase()) {
        land_start_time_ = now;
        land_z0_ = active_reference_.position.z();
        active_reference_.heading = heading_of(estimate.rotation);
      }
    }
  } else {
    inside_since_ = -1.0;
  }
  return active_reference_;
}

std::vector<std::uint8_t> Mission::encode() const {
  std::vector<std::uint8_t> out;
  wire::put_u8(out, 1);  // format version
  wire::put_u16(out, uav_id_);
  wire::put_f32(out, static_cast<float>(takeoff_altitude_));
  wire::put_u16(out, static_cast<std::uint16_t>(waypoints_.size()));
  for (const auto& wp : waypoints_) {
    wire::put_f32(out, static_cast<float>(wp.command.position.x()));
    wire::put_f32(out, static_cast<float>(wp.command.position.y()));
    wire::put_f32(out, static_cast<float>(wp.command.position.z()));
    wire::put_f32(out, static_cast<float>(wp.command.heading));
    wire::put_f32(out, static_cast<float>(wp.tolerance));
  }
  return out;
}

Mission Mission::decode(std::span<const std::uint8_t> data) {
  wire::Reader reader(data);
  const std::uint8_t version = reader.u8();
  if (version != 1) {
    throw Error("unsupported mission record version");
  }
  const UavId id = reader.u16();
  const double takeoff_altitude = reader.f32();
  const int count = reader.u16();
  std::vector<Waypoint> waypoints;
  waypoints.reserve(count);
  for (int i = 0; i < count; ++i) {
    Waypoint wp;
    wp.command.position.x() = reader.f32();
    wp.command.position.y() = reader.f32();
    wp.command.position.z() = reader.f32();
    wp.command.heading = reader.f32();
    wp.tolerance = reader.f32();
    waypoints.push_back(wp);
  }
  if (!reader.done()) {
    throw Error("trailing bytes in mission record");
  }
  return Mission(id, takeoff_altitude, std::move(waypoints));
}

std::vector<std::uint8_t> StatusRecord::encode() const {
  std::vector<std::uint8_t> out;
  wire::put_u16(out, uav_id);
  wire::put_u8(out, static_cast<std::uint8_t>(status));
  wire::put_f32(out, static_cast<float>(position.x()));
  wire::put_f32(out, static_cast<float>(position.y()));
  wire::put_f32(out, static_cast<float>(position.z()));
  return out;
}

StatusRecord StatusRecord::decode(std::span<const std::uint8_t> data) {
  wire::Reader reader(data);
  StatusRecord r;
  r.uav_id = reader.u16();
  r.status = static_cast<MissionStatus>(reader.u8());
  r.position.x() = reader.f32();
  r.position.y() = reader.f32();
  r.position.z() = reader.f32();
  if (!reader.done()) {
    throw Error("trailing bytes in status record");
  }
  return r;
}

FlockingAgent::FlockingAgent(const FlockingParams& params,
                             const ReferenceCommand& initial)
    : params_(params), reference_(initial) {}

void FlockingAgent::observe_neighbor(const RelativePoseEstimate& estimate,
                                     const Mat3& observer_rotation,
                                     double now) {
  NeighborTrack& track = neighbors_[estimate.observed_id];
  if (track.seen_at > 0.0) {
    track.has_previous = true;
    track.previous_relative = track.relative;
    track.previous_seen_at = track.seen_at;
  }
  track.relative = observer_rotation * estimate.mean;
  track.seen_at = now;
}

ReferenceCommand FlockingAgent::step(const UavState& own_estimate, double now,
                                     double dt) {
  (void)own_estimate;
  for (auto it = neighbors_.begin(); it != neighbors_.end();) {
    if (now - it->second.seen_at > params_.neighbor_timeout) {
      it = neighbors_.erase(it);
    } else {
      ++it;
    }
  }
  if (neighbors_.empty()) {
    return reference_;  // hold
  }

  Vec3 velocity = Vec3::Zero();

  Vec3 centroid = Vec3::Zero();
  for (const auto& [id, track] : neighbors_) {
    centroid += track.relative;
  }
  centroid /= static_cast<double>(neighbors_.size());
  const double centroid_distance = centroid.norm();
  if (centroid_distance > params_.desired_distance) {
    velocity += params_.cohesion_gain *
                (centroid_distance - params_.desired_distance) *
                centroid.normalized();
  }

  for (const auto& [id, track] : neighbors_) {
    const double d = track.relative.norm();
    if (d < params_.desired_distance && d > 1e-9) {
      velocity -= params_.separation_gain * (params_.desired_distance - d) *
                  track.relative.normalized();
    }
  }

  Vec3 alignment = Vec3::Zero();
  int aligned = 0;
  for (const auto& [id, track] : neighbors_) {
    if (track.has_previous && track.seen_at > track.previous_seen_at) {
      alignment += (track.relative - track.previous_relative) /
                   (track.seen_at - track.previous_seen_at);
      ++aligned;
    }
  }
  if (aligned > 0) {
    velocity += params_.alignment_gain * alignment / aligned;
  }

  const double speed = velocity.norm();
  if (speed > params_.max_speed) {
    velocity *= params_.max_speed / speed;
  }
  reference_.position += velocity * dt;
  return reference_;
}

GroundStation::GroundStation(std::string node_name, std::string command_channel)
    : node_(std::move(node_name)), channel_(std::move(command_channel)) {}

std::string GroundStation::mission_topic(UavId id) {
  return "mission/" + std::to_string(id);
}

std::string GroundStation::status_topic(UavId id) {
  return "status/" + std::to_string(id);
}

void GroundStation::setup(Network& network, const std::vector<UavId>& uav_ids) {
  for (UavId id : uav_ids) {
    network.expose_topic(node_, mission_topic(id), channel_);
    network.subscribe(node_, status_topic(id),
                      [this](const TopicMessage& message) {
                        handle_status(StatusRecord::decode(message.payload));
                      });
  }
}

std::map<UavId, PublishResult> GroundStation::dispatch(
    Network& network, const std::map<UavId, Mission>& assignments) {
  std::map<UavId, PublishResult> results;
  for (const auto& [id, mission] : assignments) {
    results[id] = network.publish(node_, mission_topic(id), mission.encode());
    dispatched_.push_back(id);
  }
  return results;
}

void GroundStation::handle_status(const StatusRecord& record) {
  acked_[record.uav_id] = record;
}

std::vector<UavId> GroundStation::unacknowledged() const {
  std::vector<UavId> out;
  for (UavId id : dispatched_) {
    if (!acked_.count(id)) {
      out.push_back(id);
    }
  }
  return out;
}

}  // namespace mstack
