#pragma once

#include <map>
#include <optional>
#include <string>

#include "mstack/geometry.hpp"

namespace mstack {

// Position + heading measurement already expressed in the source frame.
struct PoseMeasurement {
  Vec3 position{Vec3::Zero()};
  double heading{0.0};
};

struct EstimatorConfig {
  // The commanded-acceleration model is wrong by whole m/s^2 while the
  // attitude loop catches up; the process noise has to say so or the gate
  // starts rejecting honest measurements.
  double accel_process_sigma{3.0};        // m/s^2, unmodeled acceleration
  double heading_rate_process_sigma{0.3}; // rad/s
  // Input conditioning: the commanded acceleration contains feedback on the
  // estimation error itself, so an unbounded input can outrun the
  // corrections. Clamped per axis to what the airframe can plausibly fly.
  double accel_input_limit{8.0};          // m/s^2
  double initial_position_var{1.0};       // m^2
  double initial_velocity_var{1.0};       // (m/s)^2
  double initial_heading_var{0.5};        // rad^2
  double gate_sigma{5.0};                 // innovation gate
  // Absolute gate floors: without them one rejected transient can latch the
  // gate shut (the filter never widens S enough to re-accept the truth).
  double gate_position_floor{2.0};        // m
  double gate_heading_floor{0.5};         // rad
  // Complementary tilt filter: accelerometer gravity direction pulls the
  // gyro-integrated attitude at this rate.
  double tilt_correction_gain{0.2};       // 1/s
};

// Fuses the controller's commanded acceleration with multi-source odometry
// into a 100 Hz state estimate. Decoupled per-axis constant-acceleration
// Kalman filters plus a heading filter; per-source frame offsets keep the
// output continuous across source switches.
class Estimator {
 public:
  explicit Estimator(const EstimatorConfig& config = {});

  // Registers an odometry source with its measurement noise.
  void register_source(const std::string& id, double position_sigma,
                       double heading_sigma);

  bool initialized() const { return initialized_; }

  // Seeds the filter directly (scenario start pose).
  void initialize(const Vec3& position, double heading);

  // Propagates mean and covariance by dt under commanded acceleration.
  void predict(const Vec3& commanded_accel, double heading_rate, double dt);

  // Kalman update. Outliers beyond the gate are rejected (counted, state
  // unchanged). Throws UnknownSource for unregistered ids.
  void correct(const std::string& source_id, const PoseMeasurement& raw);

  // Makes source_id the reference-frame owner, re-aligning its offset so the
  // fused output is continuous. Throws SourceNeverSeen before its first
  // measurement.
  void switch_source(const std::string& source_id);

  const std::string& active_source() const { return active_source_; }
  Vec3 source_offset(const std::string& source_id) const;
  double source_heading_offset(const std::string& source_id) const;

  Vec3 position() const;
  Vec3 velocity() const;
  double heading() const;
  Mat3 position_covariance() const;  // diagonal, per-axis position variance
  double heading_variance() const;
  int rejected_count() const { return rejected_; }

  // Full state with rotation lifted from the fused heading plus the IMU tilt
  // (complementary filter); body rate comes from the last gyro sample. Falls
  // back to the commanded-acceleration tilt until an IMU sample arrives.
  // Throws NotInitialized before the first measurement or initialize().
  UavState get_state() const;

  // Integrates the gyro and corrects the tilt with the accelerometer gravity
  // direction whenever the specific-force magnitude is credibly gravity.
  void feed_imu(const Vec3& gyro, const Vec3& accel, double dt);

  void set_gyro(const Vec3& body_rate) { last_gyro_ = body_rate; }

 private:
  struct AxisFilter {
    // state [position, velocity], covariance p00/p01/p11
    double x{0.0};
    double v{0.0};
    double p00{1.0};
    double p01{0.0};
    double p11{1.0};
  };

  struct Source {
    double position_sigma;
    double heading_sigma;
    bool seen{false};
    Vec3 offset{Vec3::Zero()};
    double heading_offset{0.0};
    Vec3 last_raw_position{Vec3::Zero()};
    double last_raw_heading{0.0};
  };

  EstimatorConfig config_;
  AxisFilter axis_[3];
  double heading_{0.0};
  double heading_var_{1.0};
  bool initialized_{false};
  std::map<std::string, Source> sources_;
  std::string active_source_;
  Vec3 last_accel_cmd_{Vec3::Zero()};
  Vec3 last_gyro_{Vec3::Zero()};
  Mat3 imu_attitude_{Mat3::Identity()};  // gravity-corrected gyro integral
  bool imu_seen_{false};
  int rejected_{0};
};

}  // namespace mstack
