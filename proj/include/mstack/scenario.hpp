#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mstack/mission.hpp"
#include "mstack/netsim.hpp"
#include "mstack/plant.hpp"
#include "mstack/propulsion.hpp"
#include "mstack/tracker.hpp"
#include "mstack/uvdar.hpp"

namespace mstack {

struct OdometrySpec {
  std::string name;
  OdometrySourceConfig config;
};

enum class UavRole { kMission, kFlocking };

struct UavScenario {
  UavId id{0};
  std::string platform{"f450"};
  std::string curve{"prop_9450"};
  std::vector<std::string> modifiers;  // duct | duct_full | coax
  std::string profile{"smooth"};
  int priority{0};
  Vec3 start{Vec3::Zero()};
  double heading{0.0};
  TrackerConstraints constraints;
  std::vector<OdometrySpec> sources;
  UavRole role{UavRole::kMission};
  double takeoff_altitude{3.0};
  std::vector<Waypoint> waypoints;
  std::optional<double> failsafe_at;
  std::optional<double> switch_source_at;
  std::string switch_source_to;
};

struct UvdarScenario {
  bool enabled{false};
  SequenceSetParams sequence;
  CameraModel camera;
  double frame_rate{50.0};  // Hz, divides the 100 Hz tick rate
  double baseline{0.45};    // m
};

struct BroadcastConfig {
  std::string channel{"traj"};
  double period{0.5};  // s
  int stride{1};       // keep every Nth horizon point
  bool per_uav{false}; // clone the channel per UAV (own transceiver each)
};

struct GcsConfig {
  bool enabled{false};
  std::string channel{"cmd"};
};

struct Scenario {
  std::uint64_t seed{1};
  double duration{30.0};  // s
  double ground_z{0.0};
  std::vector<ChannelConfig> channels;
  AvoidanceConfig avoidance;
  BroadcastConfig broadcast;
  UvdarScenario uvdar;
  GcsConfig gcs;
  FlockingParams flocking;
  std::vector<UavScenario> uavs;
};

struct Catalogs {
  std::map<std::string, PropulsionCurve> curves;
  std::map<std::string, PlatformSpec> platforms;
};

// Bundled data directory; MRS_MICROSTACK_DATA overrides the build-time path.
std::string default_data_dir();

Catalogs load_catalogs(const std::string& data_dir);

struct ScenarioIssue {
  int line;  // 0 when not tied to a specific line
  std::string message;
};

struct ScenarioLoadResult {
  std::optional<Scenario> scenario;
  std::vector<ScenarioIssue> errors;

  bool ok() const { return scenario.has_value() && errors.empty(); }
};

// Parses and fully validates a scenario file; every violation is reported
// with its line number rather than stopping at the first.
ScenarioLoadResult load_scenario(const std::string& path,
                                 const Catalogs& catalogs);

// Validation of an in-memory scenario (used by the loader and by tests that
// build scenarios programmatically).
std::vector<ScenarioIssue> validate_scenario(const Scenario& scenario,
                                             const Catalogs& catalogs);

}  // namespace mstack
