#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mstack/controller.hpp"
#include "mstack/estimator.hpp"
#include "mstack/scenario.hpp"

namespace mstack {

struct UavRunStats {
  UavId id{0};
  MissionStatus status{MissionStatus::kIdle};
  std::vector<double> waypoint_errors;  // m, truth error at each arrival
  std::vector<double> waypoint_times;   // s, arrival event stamps
  double estimate_rmse{0.0};            // m, over all 100 Hz ticks
  double mission_done_time{-1.0};       // s, <0 when never finished
  std::vector<ReferenceCommand> command_trace;  // per 100 Hz tick
};

struct ChannelReport {
  std::string name;
  ChannelStats stats;
};

struct RunReport {
  std::uint64_t seed{0};
  double duration{0.0};
  std::uint64_t fast_ticks{0};
  std::vector<UavRunStats> uavs;
  std::vector<ChannelReport> channels;
  double min_separation{0.0};  // m, 3D, over all pairs and 100 Hz ticks
  double min_separation_time{0.0};
  UavId min_separation_pair[2]{0, 0};
  double wall_time{0.0};  // s, excluded from the serialized report

  std::string to_text() const;  // deterministic report file body
};

// Executes a validated scenario: plant + embedded loop at 1 kHz, tracker /
// controller / estimator / netsim at 100 Hz, CSV telemetry per UAV.
class Runner {
 public:
  Runner(const Scenario& scenario, const Catalogs& catalogs);
  ~Runner();

  // out_dir empty: no files written. Throws SimulationPanic with a tick stamp
  // when a module fails mid-run.
  RunReport run(const std::string& out_dir = "");

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mstack
