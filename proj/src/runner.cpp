#include "mstack/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mstack/rng.hpp"

namespace mstack {

namespace {

constexpr double kFastDt = 0.001;   // plant + embedded loop
constexpr int kFastPerSlow = 10;    // 100 Hz outer loop
constexpr double kSlowDt = kFastDt * kFastPerSlow;

std::string uav_node(UavId id) {
  return "uav" + std::to_string(id);
}

std::string traj_topic(UavId id) {
  return "traj/" + std::to_string(id);
}

// %.17g round-trips doubles exactly, keeping the CSV cross-checkable.
void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

Eigen::Quaterniond to_quat(const Mat3& r) {
  return Eigen::Quaterniond(r);
}

}  // namespace

std::string RunReport::to_text() const {
  std::string out;
  out += "# microstack run report v1\n";
  out += "seed " + std::to_string(seed) + "\n";
  std::string num;
  num.clear();
  append_number(num, duration);
  out += "duration " + num + "\n";
  out += "fast_ticks " + std::to_string(fast_ticks) + "\n";
  if (uavs.size() > 1) {
    num.clear();
    append_number(num, min_separation);
    out += "min_separation " + num + "\n";
    out += "min_separation_pair " + std::to_string(min_separation_pair[0]) +
           " " + std::to_string(min_separation_pair[1]) + "\n";
    num.clear();
    append_number(num, min_separation_time);
    out += "min_separation_time " + num + "\n";
  }
  for (const auto& uav : uavs) {
    out += "uav " + std::to_string(uav.id) + " status ";
    switch (uav.status) {
      case MissionStatus::kIdle: out += "idle"; break;
      case MissionStatus::kArmed: out += "armed"; break;
      case MissionStatus::kExecuting: out += "executing"; break;
      case MissionStatus::kDone: out += "done"; break;
      case MissionStatus::kFailsafe: out += "failsafe"; break;
    }
    out += " rmse ";
    num.clear();
    append_number(num, uav.estimate_rmse);
    out += num;
    out += " waypoint_errors";
    if (uav.waypoint_errors.empty()) {
      out += " none";
    } else {
      for (double e : uav.waypoint_errors) {
        num.clear();
        append_number(num, e);
        out += " " + num;
      }
    }
    out += "\n";
  }
  for (const auto& ch : channels) {
    out += "channel " + ch.name + " sent " + std::to_string(ch.stats.sent) +
           " delivered " + std::to_string(ch.stats.delivered) + " lost " +
           std::to_string(ch.stats.lost) + " in_flight " +
           std::to_string(ch.stats.in_flight()) + " rejected_oversized " +
           std::to_string(ch.stats.rejected_oversized) +
           " rejected_backpressure " +
           std::to_string(ch.stats.rejected_backpressure) + " no_subscriber " +
           std::to_string(ch.stats.no_subscriber) + "\n";
  }
  return out;
}

struct Runner::Impl {
  struct UavSim {
    UavScenario cfg;
    PlatformSpec platform;
    RigidBodyParams body;
    ControllerGains gains;
    ControllerParams ctl_params;
    ImuConfig imu_config;

    std::unique_ptr<MultirotorPlant> plant;
    std::unique_ptr<AttitudeRateLoop> rate_loop;
    Estimator estimator;
    std::unique_ptr<Tracker> tracker;
    std::vector<OdometrySource> sources;
    std::vector<double> next_sample;  // per source
    std::deque<std::pair<std::string, OdometryMeasurement>> pending;

    Mission mission;
    std::unique_ptr<FlockingAgent> flock;
    BlinkSequence sequence;
    std::map<UavId, std::vector<bool>> blink_windows;

    std::mt19937_64 imu_rng;
    std::mt19937_64 uvdar_rng;

    AttitudeRateCommand att_cmd;
    Vec3 a_d{Vec3::Zero()};
    double heading_rate_ref{0.0};
    Vec3 last_gyro{Vec3::Zero()};
    MotorCommand last_motor_cmd;
    double next_broadcast{0.0};
    bool failsafe_fired{false};
    bool switched{false};

    double rmse_accum{0.0};
    std::uint64_t rmse_count{0};
    UavRunStats stats;

    std::string csv;
  };

  Scenario scenario;
  Catalogs catalogs;
  SeedTree seeds;
  Network net;
  std::vector<UavSim> uavs;
  std::unique_ptr<GroundStation> gcs;
  std::vector<BlinkSequence> sequence_set;
  double uvdar_frame_period{0.02};
  double next_uvdar_frame{0.0};
  std::uint64_t uvdar_frame_index{0};

  Impl(const Scenario& scn, const Catalogs& cats)
      : scenario(scn), catalogs(cats), seeds(scn.seed), net(seeds.derive("net")) {
    for (const auto& ch : scenario.channels) {
      net.add_channel(ch);
    }
    if (scenario.uvdar.enabled) {
      sequence_set = generate_set(scenario.uvdar.sequence);
      uvdar_frame_period = 1.0 / scenario.uvdar.frame_rate;
    }

    std::vector<UavScenario> ordered = scenario.uavs;
    std::sort(ordered.begin(), ordered.end(),
              [](const UavScenario& a, const UavScenario& b) { return a.id < b.id; });

    for (std::size_t idx = 0; idx < ordered.size(); ++idx) {
      const UavScenario& cfg = ordered[idx];
      UavSim sim;
      sim.cfg = cfg;
      sim.platform = catalogs.platforms.at(cfg.platform);

      PropulsionCurve curve = catalogs.curves.at(cfg.curve);
      for (const auto& mod : cfg.modifiers) {
        if (mod == "duct") {
          curve = apply_modifier(curve, ConfigModifier::ducted_fan());
        } else if (mod == "duct_full") {
          curve = apply_modifier(curve, ConfigModifier::duct_with_ducting());
        } else if (mod == "coax") {
          curve = apply_modifier(curve, ConfigModifier::coaxial());
        }
      }

      const double arm = sim.platform.dimension / 2.0 / 1000.0;
      sim.body = sim.platform.layout == RotorLayout::kCoaxial
                     ? RigidBodyParams::coax_octo(sim.platform.takeoff_mass, arm)
                     : RigidBodyParams::quad_x(sim.platform.takeoff_mass, arm);
      sim.body.rotor_max_thrust = curve.max_thrust();

      sim.gains = select_profile(cfg.profile);
      sim.ctl_params.mass = sim.body.mass;
      sim.ctl_params.max_thrust = sim.body.max_total_thrust();

      UavState initial;
      initial.position = cfg.start;
      initial.rotation = rot_z(cfg.heading);
      sim.plant = std::make_unique<MultirotorPlant>(sim.body, initial,
                                                    scenario.ground_z);
      if (cfg.start.z() > scenario.ground_z + 1e-6) {
        // Airborne start: trim the motors at hover.
        const double hover = sim.body.mass * kGravity / sim.body.rotor_count();
        sim.plant->set_motor_thrust(std::vector<double>(
            sim.body.rotor_count(), std::min(hover, sim.body.rotor_max_thrust)));
      }
      sim.rate_loop = std::make_unique<AttitudeRateLoop>(sim.body);
      sim.last_motor_cmd.thrust.assign(sim.body.rotor_count(), 0.0);

      for (const auto& src : cfg.sources) {
        sim.estimator.register_source(src.name, src.config.position_noise_sigma,
                                      src.config.heading_noise_sigma);
        sim.sources.emplace_back(
            src.name, src.config,
            seeds.stream(uav_node(cfg.id) + "/odom/" + src.name));
        sim.next_sample.push_back(0.0);
      }
      sim.estimator.initialize(cfg.start, cfg.heading);

      sim.tracker = std::make_unique<Tracker>(cfg.id, cfg.priority,
                                              cfg.constraints);

      if (cfg.role == UavRole::kMission) {
        sim.mission = Mission(cfg.id, cfg.takeoff_altitude, cfg.waypoints);
        if (!scenario.gcs.enabled) {
          sim.mission.arm();
        }
      } else {
        ReferenceCommand hold;
        hold.position = cfg.start;
        hold.heading = cfg.heading;
        sim.flock = std::make_unique<FlockingAgent>(scenario.flocking, hold);
      }

      if (scenario.uvdar.enabled) {
        sim.sequence = sequence_set[idx % sequence_set.size()];
      }
      sim.imu_rng = seeds.stream(uav_node(cfg.id) + "/imu");
      sim.uvdar_rng = seeds.stream(uav_node(cfg.id) + "/uvdar");
      sim.imu_config.rotor_frequency = 100.0;

      sim.stats.id = cfg.id;
      uavs.push_back(std::move(sim));
    }

    // Network wiring: trajectory broadcast + optional GCS command path.
    const bool multi = uavs.size() > 1;
    if (multi && net.has_channel(scenario.broadcast.channel)) {
      for (auto& sim : uavs) {
        std::string channel = scenario.broadcast.channel;
        if (scenario.broadcast.per_uav) {
          // Each UAV broadcasts on its own transceiver.
          ChannelConfig clone = net.channel_config(scenario.broadcast.channel);
          clone.name = scenario.broadcast.channel + "_" +
                       std::to_string(sim.cfg.id);
          net.add_channel(clone);
          channel = clone.name;
        }
        net.expose_topic(uav_node(sim.cfg.id), traj_topic(sim.cfg.id), channel);
      }
      for (auto& sim : uavs) {
        for (auto& other : uavs) {
          if (other.cfg.id != sim.cfg.id) {
            net.subscribe(uav_node(sim.cfg.id), traj_topic(other.cfg.id));
          }
        }
      }
    }
    if (scenario.gcs.enabled) {
      gcs = std::make_unique<GroundStation>("gcs", scenario.gcs.channel);
      std::vector<UavId> ids;
      for (const auto& sim : uavs) {
        ids.push_back(sim.cfg.id);
      }
      for (const auto& sim : uavs) {
        net.expose_topic(uav_node(sim.cfg.id),
                         GroundStation::status_topic(sim.cfg.id),
                         scenario.gcs.channel);
        net.subscribe(uav_node(sim.cfg.id),
                      GroundStation::mission_topic(sim.cfg.id));
      }
      gcs->setup(net, ids);
    }
  }

  UavSim* find(UavId id) {
    for (auto& sim : uavs) {
      if (sim.cfg.id == id) {
        return &sim;
      }
    }
    return nullptr;
  }

  void csv_header(UavSim& sim) {
    std::string& out = sim.csv;
    out += "# microstack telemetry v1\n";
    out += "tick,t,tx,ty,tz,tqw,tqx,tqy,tqz,ex,ey,ez,eqw,eqx,eqy,eqz,"
           "rx,ry,rz,rvx,rvy,rvz,rax,ray,raz,rheading,rheading_rate,"
           "thrust_d,wxd,wyd,wzd";
    for (int i = 0; i < sim.body.rotor_count(); ++i) {
      out += ",m" + std::to_string(i + 1);
    }
    out += "\n";
  }

  void csv_row(UavSim& sim, std::uint64_t tick, double t,
               const UavState& truth, const UavState& est,
               const FullStateReference& ref) {
    std::string& out = sim.csv;
    out += std::to_string(tick);
    out += ',';
    append_number(out, t);
    const auto qt = to_quat(truth.rotation);
    const auto qe = to_quat(est.rotation);
    const double cols[] = {
        truth.position.x(), truth.position.y(), truth.position.z(),
        qt.w(), qt.x(), qt.y(), qt.z(),
        est.position.x(), est.position.y(), est.position.z(),
        qe.w(), qe.x(), qe.y(), qe.z(),
        ref.position.x(), ref.position.y(), ref.position.z(),
        ref.velocity.x(), ref.velocity.y(), ref.velocity.z(),
        ref.acceleration.x(), ref.acceleration.y(), ref.acceleration.z(),
        ref.heading, ref.heading_rate,
        sim.att_cmd.thrust,
        sim.att_cmd.body_rate_setpoint.x(),
        sim.att_cmd.body_rate_setpoint.y(),
        sim.att_cmd.body_rate_setpoint.z()};
    for (double v : cols) {
      out += ',';
      append_number(out, v);
    }
    for (double m : sim.last_motor_cmd.thrust) {
      out += ',';
      append_number(out, m);
    }
    out += '\n';
  }

  void process_uvdar_frame(double t) {
    // Geometric visibility gates the blink windows; a completed window that
    // decodes to a valid id yields a noisy relative observation.
    for (auto& observer : uavs) {
      if (!observer.flock) {
        continue;  // only flocking agents consume mutual localization here
      }
      for (auto& target : uavs) {
        if (target.cfg.id == observer.cfg.id) {
          continue;
        }
        auto& window = observer.blink_windows[target.cfg.id];
        const bool vis = marker_pair_visible(
            observer.plant->state(), target.plant->state(), scenario.uvdar.baseline,
            scenario.uvdar.camera);
        if (!vis) {
          window.clear();
          continue;
        }
        window.push_back(encode(target.sequence, uvdar_frame_index));
        if (window.size() < static_cast<std::size_t>(scenario.uvdar.sequence.length)) {
          continue;
        }
        const DecodeResult decoded = decode(window, sequence_set);
        window.clear();
        if (decoded.kind != DecodeResult::Kind::kMatch) {
          continue;
        }
        auto obs = observe(observer.plant->state(), target.plant->state(),
                           scenario.uvdar.baseline, scenario.uvdar.camera,
                           observer.uvdar_rng);
        if (obs) {
          obs->observed_id = decoded.id;
          const UavState est = observer.estimator.get_state();
          observer.flock->observe_neighbor(*obs, est.rotation, t);
        }
      }
    }
  }

  RunReport run(const std::string& out_dir) {
    const auto wall_start = std::chrono::steady_clock::now();
    RunReport report;
    report.seed = scenario.seed;
    report.duration = scenario.duration;
    report.min_separation = std::numeric_limits<double>::infinity();

    for (auto& sim : uavs) {
      csv_header(sim);
    }

    const std::uint64_t n_slow =
        static_cast<std::uint64_t>(std::llround(scenario.duration / kSlowDt));
    std::uint64_t fast_tick = 0;

    for (std::uint64_t slow = 0; slow < n_slow; ++slow) {
      const double t = static_cast<double>(slow) * kSlowDt;

      if (slow == 0 && gcs) {
        std::map<UavId, Mission> assignments;
        for (auto& sim : uavs) {
          if (sim.cfg.role == UavRole::kMission) {
            assignments[sim.cfg.id] =
                Mission(sim.cfg.id, sim.cfg.takeoff_altitude, sim.cfg.waypoints);
          }
        }
        gcs->dispatch(net, assignments);
      }

      // Network tick: release due messages and route them.
      if (slow > 0) {
        for (const auto& delivery : net.step(kSlowDt)) {
          const std::string& topic = delivery.message.topic;
          if (topic.rfind("traj/", 0) == 0) {
            UavSim* receiver = nullptr;
            for (auto& sim : uavs) {
              if (uav_node(sim.cfg.id) == delivery.node) {
                receiver = &sim;
                break;
              }
            }
            if (receiver) {
              receiver->tracker->incorporate_neighbor(
                  PredictedTrajectory::decode(delivery.message.payload),
                  scenario.avoidance);
            }
          } else if (topic.rfind("mission/", 0) == 0) {
            for (auto& sim : uavs) {
              if (uav_node(sim.cfg.id) == delivery.node) {
                sim.mission = Mission::decode(delivery.message.payload);
                sim.mission.arm();
                StatusRecord ack{sim.cfg.id, sim.mission.status(),
                                 sim.estimator.position()};
                net.publish(delivery.node,
                            GroundStation::status_topic(sim.cfg.id),
                            ack.encode());
              }
            }
          }
          // status/* topics are consumed by the GCS handler during step()
        }
      }

      // UVDAR frames run at their own divisor of the slow tick.
      if (scenario.uvdar.enabled && t + 1e-9 >= next_uvdar_frame) {
        process_uvdar_frame(t);
        ++uvdar_frame_index;
        next_uvdar_frame += uvdar_frame_period;
      }

      for (auto& sim : uavs) {
        try {
          // Scheduled scenario events.
          if (sim.cfg.failsafe_at && !sim.failsafe_fired &&
              t + 1e-9 >= *sim.cfg.failsafe_at) {
            sim.mission.trigger_failsafe();
            sim.failsafe_fired = true;
          }
          if (sim.cfg.switch_source_at && !sim.switched &&
              t + 1e-9 >= *sim.cfg.switch_source_at) {
            sim.estimator.switch_source(sim.cfg.switch_source_to);
            sim.switched = true;
          }

          // Odometry sampling and delayed delivery.
          for (std::size_t s = 0; s < sim.sources.size(); ++s) {
            if (t + 1e-9 >= sim.next_sample[s]) {
              if (auto m = sim.sources[s].sample(sim.plant->state(), t)) {
                sim.pending.emplace_back(sim.sources[s].id(), *m);
              }
              sim.next_sample[s] += 1.0 / sim.sources[s].config().rate;
            }
          }

          sim.estimator.predict(sim.a_d, sim.heading_rate_ref, kSlowDt);
          while (!sim.pending.empty() &&
                 sim.pending.front().second.delivery_time <= t + 1e-9) {
            const auto& [source_id, m] = sim.pending.front();
            sim.estimator.correct(source_id, {m.position, m.heading});
            sim.pending.pop_front();
          }
          const UavState est = sim.estimator.get_state();

          // Reference generation.
          if (sim.flock) {
            const ReferenceCommand cmd = sim.flock->step(est, t, kSlowDt);
            sim.tracker->set_reference(cmd);
            sim.stats.command_trace.push_back(cmd);
          } else {
            if (auto cmd = sim.mission.step(est, t, scenario.ground_z)) {
              sim.tracker->set_reference(*cmd);
              sim.stats.command_trace.push_back(*cmd);
            }
            if (sim.mission.arrival_pending()) {
              sim.mission.log_arrival(sim.plant->state().position);
              sim.mission.clear_arrival_pending();
              sim.stats.waypoint_times.push_back(t);
            }
            if (sim.mission.status() == MissionStatus::kDone &&
                sim.stats.mission_done_time < 0.0) {
              sim.stats.mission_done_time = t;
            }
          }

          const FullStateReference ref = sim.tracker->update(est, t);
          const ControllerOutput ctl =
              compute_control(ref, est, sim.gains, sim.ctl_params);
          sim.att_cmd = ctl.command;
          sim.a_d = ctl.desired_acceleration;
          sim.heading_rate_ref = ref.heading_rate;

          // Periodic horizon broadcast.
          if (uavs.size() > 1 && net.has_channel(scenario.broadcast.channel) &&
              t + 1e-9 >= sim.next_broadcast) {
            PredictedTrajectory traj = sim.tracker->predicted_trajectory(t);
            if (scenario.broadcast.stride > 1) {
              std::vector<Vec3> kept;
              for (std::size_t i = 0; i < traj.points.size();
                   i += scenario.broadcast.stride) {
                kept.push_back(traj.points[i]);
              }
              traj.points = std::move(kept);
              traj.dt *= scenario.broadcast.stride;
            }
            net.publish(uav_node(sim.cfg.id), traj_topic(sim.cfg.id),
                        traj.encode());
            sim.next_broadcast += scenario.broadcast.period;
          }

          const UavState& truth = sim.plant->state();
          sim.rmse_accum += (est.position - truth.position).squaredNorm();
          ++sim.rmse_count;
          csv_row(sim, fast_tick, t, truth, est, ref);
        } catch (const Error& e) {
          throw SimulationPanic("uav " + std::to_string(sim.cfg.id) +
                                " at tick " + std::to_string(fast_tick) + ": " +
                                e.what());
        }
      }

      // Pairwise separation at the 100 Hz tick.
      for (std::size_t a = 0; a < uavs.size(); ++a) {
        for (std::size_t b = a + 1; b < uavs.size(); ++b) {
          const double d = (uavs[a].plant->state().position -
                            uavs[b].plant->state().position)
                               .norm();
          if (d < report.min_separation) {
            report.min_separation = d;
            report.min_separation_time = t;
            report.min_separation_pair[0] = uavs[a].cfg.id;
            report.min_separation_pair[1] = uavs[b].cfg.id;
          }
        }
      }

      // Embedded loop + plant at 1 kHz.
      for (int f = 0; f < kFastPerSlow; ++f) {
        const double tf = t + f * kFastDt;
        for (auto& sim : uavs) {
          const ImuSample imu =
              sample_imu(sim.plant->state(), sim.plant->inertial_acceleration(),
                         tf, sim.imu_config, true, sim.imu_rng);
          sim.last_gyro = imu.gyro;
          sim.estimator.feed_imu(imu.gyro, imu.accel, kFastDt);
          const AllocationResult alloc =
              sim.rate_loop->step(imu.gyro, sim.att_cmd, kFastDt);
          sim.last_motor_cmd = alloc.command;
          sim.plant->step(alloc.command, kFastDt);
        }
        ++fast_tick;
      }
    }

    report.fast_ticks = fast_tick;
    for (auto& sim : uavs) {
      sim.stats.status = sim.flock ? MissionStatus::kExecuting
                                   : sim.mission.status();
      sim.stats.estimate_rmse =
          sim.rmse_count ? std::sqrt(sim.rmse_accum / sim.rmse_count) : 0.0;
      sim.stats.waypoint_errors.clear();
      const auto& arrivals = sim.mission.arrival_log();
      for (std::size_t i = 0;
           i < arrivals.size() && i < sim.mission.waypoints().size(); ++i) {
        sim.stats.waypoint_errors.push_back(
            (arrivals[i] - sim.mission.waypoints()[i].command.position).norm());
      }
      report.uavs.push_back(sim.stats);
    }
    for (const auto& name : net.channel_names()) {
      report.channels.push_back({name, net.stats(name)});
    }

    if (!out_dir.empty()) {
      namespace fs = std::filesystem;
      fs::create_directories(out_dir);
      for (auto& sim : uavs) {
        std::ofstream csv(fs::path(out_dir) /
                          ("uav" + std::to_string(sim.cfg.id) + ".csv"),
                          std::ios::binary);
        csv << sim.csv;
      }
      std::ofstream rep(fs::path(out_dir) / "report.txt", std::ios::binary);
      rep << report.to_text();
    }

    report.wall_time = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - wall_start)
                           .count();
    return report;
  }
};

Runner::Runner(const Scenario& scenario, const Catalogs& catalogs)
    : impl_(std::make_unique<Impl>(scenario, catalogs)) {}

Runner::~Runner() = default;

RunReport Runner::run(const std::string& out_dir) {
  return impl_->run(out_dir);
}

}  // namespace mstack
