#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mstack/geometry.hpp"

namespace mstack {

// Feasibility envelope for the emitted full-state reference.
struct TrackerConstraints {
  double v_max_h{2.0};           // m/s, horizontal
  double v_max_v{1.5};           // m/s, vertical
  double a_max_h{4.0};           // m/s^2
  double a_max_v{3.0};           // m/s^2
  double j_max{8.0};             // m/s^3
  double heading_rate_max{1.5};  // rad/s
};

// Planned horizon broadcast for mutual collision avoidance. Wire layout:
// uav_id u16, priority u8, start_time f64, dt f32, point count u16, then
// 3 x f32 per point, little-endian (497 bytes at 40 points).
struct PredictedTrajectory {
  UavId uav_id{0};
  int priority{0};  // lower value = higher priority
  double start_time{0.0};
  double dt{0.2};
  std::vector<Vec3> points;

  std::vector<std::uint8_t> encode() const;
  static PredictedTrajectory decode(std::span<const std::uint8_t> data);
};

struct AvoidanceConfig {
  double r_min{2.5};           // m, critical separation
  double trigger_radius{6.0};  // m, horizontal conflict distance, > r_min
  double altitude_offset{3.5}; // m, climb per conflicting higher-priority UAV
  bool enabled{true};
};

// Model-predictive reference tracker on decoupled integrator chains: a
// jerk-input triple integrator per translational axis and an
// acceleration-input double integrator for heading. Each tick applies the
// exact Riccati solution of the horizon QP through a limiter that enforces
// the constraint envelope sample by sample, and the broadcast horizon is the
// rollout of the same law, so plans and future outputs coincide.
class Tracker {
 public:
  struct Options {
    int horizon{40};
    double horizon_dt{0.2};      // s
    double output_dt{0.01};      // s, 100 Hz
    double heading_accel_max{6.0};  // rad/s^2
    double stale_cutoff{2.0};    // s, neighbor trajectories older than this
    double clear_hold{2.0};      // s of conflict-free evidence before resuming
  };

  Tracker(UavId uav_id, int priority, const TrackerConstraints& constraints);
  Tracker(UavId uav_id, int priority, const TrackerConstraints& constraints,
          const Options& options);

  UavId uav_id() const { return uav_id_; }
  int priority() const { return priority_; }
  const TrackerConstraints& constraints() const { return constraints_; }
  bool initialized() const { return initialized_; }

  // Terminal target of subsequent solves.
  void set_reference(const ReferenceCommand& cmd);
  const ReferenceCommand& reference() const { return reference_; }

  // Advances the internal reference model by one 100 Hz tick and returns the
  // feasible full-state sample. Initializes from the estimate on first call.
  FullStateReference update(const UavState& estimate, double now);

  // Planned horizon from the current internal state. Throws NotInitialized.
  PredictedTrajectory predicted_trajectory(double now) const;

  // Stores a neighbor's broadcast horizon for conflict evaluation at the next
  // update tick. Stale input is dropped silently (counted).
  void incorporate_neighbor(const PredictedTrajectory& trajectory,
                            const AvoidanceConfig& config);

  bool avoidance_active() const { return !conflicts_.empty(); }
  int stale_dropped() const { return stale_dropped_; }

 private:
  struct AxisState {
    double p{0.0};
    double v{0.0};
    double a{0.0};
  };

  struct NeighborRecord {
    PredictedTrajectory trajectory;
  };

  struct ConflictRecord {
    double last_conflict_seen;   // s
    double clear_evidence_start; // s, first fresh no-conflict evaluation
    bool clearing;
  };

  static void step_translation(AxisState state[3], const Vec3& target,
                               const Eigen::Matrix<double, 1, 3>& gain,
                               const TrackerConstraints& constraints,
                               double speed_scale, double dt);
  void advance_output_tick();
  void evaluate_conflicts(double now);
  double axis_v_limit(int axis) const;
  double axis_a_limit(int axis) const;
  std::vector<Vec3> rollout(int points) const;

  UavId uav_id_;
  int priority_;
  TrackerConstraints constraints_;
  Options options_;

  bool initialized_{false};
  bool reference_set_{false};
  AxisState axis_[3];
  double heading_{0.0};
  double heading_rate_{0.0};
  ReferenceCommand reference_;
  double now_{0.0};

  Eigen::Matrix<double, 1, 3> gain_axis_;
  Eigen::Matrix<double, 1, 2> gain_heading_;

  AvoidanceConfig avoidance_config_;
  std::map<UavId, NeighborRecord> neighbors_;
  std::map<UavId, ConflictRecord> conflicts_;
  double altitude_bias_{0.0};     // m, applied to the vertical target
  double speed_scale_{1.0};       // applied to the horizontal velocity limit
  int stale_dropped_{0};
};

}  // namespace mstack
