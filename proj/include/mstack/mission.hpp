#pragma once

#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mstack/geometry.hpp"
#include "mstack/netsim.hpp"
#include "mstack/uvdar.hpp"

namespace mstack {

enum class MissionStatus : std::uint8_t {
  kIdle = 0,
  kArmed = 1,
  kExecuting = 2,
  kDone = 3,
  kFailsafe = 4,
};

struct Waypoint {
  ReferenceCommand command;
  double tolerance{0.5};  // m
};

// Takeoff -> waypoints -> land state machine; phases only advance, except the
// failsafe transition.
class Mission {
 public:
  Mission() = default;
  Mission(UavId uav_id, double takeoff_altitude, std::vector<Waypoint> waypoints);

  UavId uav_id() const { return uav_id_; }
  MissionStatus status() const { return status_; }
  int phase_index() const { return phase_; }
  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  double takeoff_altitude() const { return takeoff_altitude_; }

  void arm();
  // External failsafe: hold position, then descend.
  void trigger_failsafe();

  // Emits the active phase's reference; advances when the estimate has stayed
  // within tolerance for one second. Returns nullopt when done.
  std::optional<ReferenceCommand> step(const UavState& estimate, double now,
                                       double ground_z);

  // Truth position captured at each waypoint-arrival event.
  const std::vector<Vec3>& arrival_log() const { return arrivals_; }
  void log_arrival(const Vec3& truth_position) { arrivals_.push_back(truth_position); }
  bool arrival_pending() const { return arrival_pending_; }
  void clear_arrival_pending() { arrival_pending_ = false; }

  // Wire codec: version byte, uav id, takeoff altitude, waypoint count, then
  // x/y/z/heading/tolerance per waypoint (f32, little-endian).
  std::vector<std::uint8_t> encode() const;
  static Mission decode(std::span<const std::uint8_t> data);

 private:
  // Phase layout: 0 = takeoff, 1..N = waypoints, N+1 = land.
  int land_phase() const { return static_cast<int>(waypoints_.size()) + 1; }

  UavId uav_id_{0};
  double takeoff_altitude_{2.0};
  std::vector<Waypoint> waypoints_;
  MissionStatus status_{MissionStatus::kIdle};
  int phase_{0};
  double inside_since_{-1.0};  // s, first tick within tolerance; <0 outside
  bool have_start_{false};
  Vec3 start_position_{Vec3::Zero()};
  double start_heading_{0.0};
  ReferenceCommand active_reference_;
  bool failsafe_latched_{false};
  double failsafe_descent_start_{0.0};
  double failsafe_z0_{0.0};
  double land_start_time_{0.0};
  double land_z0_{0.0};
  std::vector<Vec3> arrivals_;
  bool arrival_pending_{false};
};

// 15-byte mission status record sized for the 100 B/s channel: uav id u16,
// status u8, position 3 x f32.
struct StatusRecord {
  UavId uav_id{0};
  MissionStatus status{MissionStatus::kIdle};
  Vec3 position{Vec3::Zero()};

  std::vector<std::uint8_t> encode() const;
  static StatusRecord decode(std::span<const std::uint8_t> data);
};

struct FlockingParams {
  double desired_distance{8.0};   // m
  double cohesion_gain{0.4};      // 1/s
  double separation_gain{0.8};    // 1/s
  double alignment_gain{0.3};     // 1/s
  double max_speed{1.5};          // m/s
  double neighbor_timeout{3.0};   // s
};

// Reynolds-style flocking on UVDAR relative estimates only. The commanded
// reference is integrated internally, so the rule never consumes absolute
// neighbor state.
class FlockingAgent {
 public:
  FlockingAgent(const FlockingParams& params, const ReferenceCommand& initial);

  const FlockingParams& params() const { return params_; }

  // Feeds one relative observation (observer body frame); the observer's
  // rotation estimate lifts it into the world-aligned frame used by the rule.
  void observe_neighbor(const RelativePoseEstimate& estimate,
                        const Mat3& observer_rotation, double now);

  // One 100 Hz step: returns the updated position reference.
  ReferenceCommand step(const UavState& own_estimate, double now, double dt);

 private:
  struct NeighborTrack {
    Vec3 relative;      // m, world-aligned relative position
    double seen_at;     // s
    bool has_previous{false};
    Vec3 previous_relative{Vec3::Zero()};
    double previous_seen_at{0.0};
  };

  FlockingParams params_;
  ReferenceCommand reference_;
  std::map<int, NeighborTrack> neighbors_;
};

// Centralized ground-station dispatch over the simulated network.
class GroundStation {
 public:
  GroundStation(std::string node_name, std::string command_channel);

  const std::string& node_name() const { return node_; }

  // Exposes per-UAV mission topics and subscribes to their status acks.
  void setup(Network& network, const std::vector<UavId>& uav_ids);

  // Serializes and publishes each mission; returns per-UAV publish results.
  std::map<UavId, PublishResult> dispatch(Network& network,
                                          const std::map<UavId, Mission>& assignments);

  // Feeds a delivered status record back into the ack table.
  void handle_status(const StatusRecord& record);

  bool acked(UavId id) const { return acked_.count(id) > 0; }
  std::vector<UavId> unacknowledged() const;

  static std::string mission_topic(UavId id);
  static std::string status_topic(UavId id);

 private:
  std::string node_;
  std::string channel_;
  std::vector<UavId> dispatched_;
  std::map<UavId, StatusRecord> acked_;
};

}  // namespace mstack
