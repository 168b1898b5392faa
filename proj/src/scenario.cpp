#include "mstack/scenario.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace mstack {

namespace {

#ifndef MSTACK_DATA_DIR
#define MSTACK_DATA_DIR "data"
#endif

std::vector<std::string> tokenize(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) {
    tokens.push_back(tok);
  }
  return tokens;
}

// Splits "key=value" tokens of an inline record into a map; positional tokens
// are returned in order.
struct InlineRecord {
  std::vector<std::string> positional;
  std::map<std::string, std::string> options;
};

InlineRecord parse_inline(const std::string& value) {
  InlineRecord rec;
  for (const auto& tok : tokenize(value)) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      rec.positional.push_back(tok);
    } else {
      rec.options[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  return rec;
}

struct Parser {
  std::vector<ScenarioIssue>& errors;

  bool to_double(const std::string& s, int line, double& out) {
    try {
      std::size_t used = 0;
      out = std::stod(s, &used);
      if (used != s.size()) {
        throw std::invalid_argument(s);
      }
      return true;
    } catch (const std::exception&) {
      errors.push_back({line, "expected a number, got '" + s + "'"});
      return false;
    }
  }

  bool to_int(const std::string& s, int line, long& out) {
    try {
      std::size_t used = 0;
      out = std::stol(s, &used);
      if (used != s.size()) {
        throw std::invalid_argument(s);
      }
      return true;
    } catch (const std::exception&) {
      errors.push_back({line, "expected an integer, got '" + s + "'"});
      return false;
    }
  }

  bool to_bool(const std::string& s, int line, bool& out) {
    if (s == "true" || s == "1" || s == "yes") {
      out = true;
      return true;
    }
    if (s == "false" || s == "0" || s == "no") {
      out = false;
      return true;
    }
    errors.push_back({line, "expected true/false, got '" + s + "'"});
    return false;
  }
};

}  // namespace

std::string default_data_dir() {
  if (const char* env = std::getenv("MRS_MICROSTACK_DATA")) {
    return env;
  }
  return MSTACK_DATA_DIR;
}

Catalogs load_catalogs(const std::string& data_dir) {
  namespace fs = std::filesystem;
  Catalogs catalogs;
  const fs::path curves_dir = fs::path(data_dir) / "curves";
  if (fs::is_directory(curves_dir)) {
    for (const auto& entry : fs::directory_iterator(curves_dir)) {
      if (entry.path().extension() == ".txt") {
        const std::string name = entry.path().stem().string();
        catalogs.curves[name] = load_curve(entry.path().string(), name);
      }
    }
  }
  const fs::path platforms = fs::path(data_dir) / "platforms.txt";
  if (fs::exists(platforms)) {
    for (auto& spec : load_platforms(platforms.string())) {
      catalogs.platforms[spec.name] = spec;
    }
  }
  return catalogs;
}

ScenarioLoadResult load_scenario(const std::string& path,
                                 const Catalogs& catalogs) {
  ScenarioLoadResult result;
  std::ifstream in(path);
  if (!in) {
    result.errors.push_back({0, "cannot open scenario file " + path});
    return result;
  }

  Scenario scenario;
  Parser p{result.errors};

  enum class Section {
    kTop,
    kChannel,
    kAvoidance,
    kBroadcast,
    kUvdar,
    kGcs,
    kFlocking,
    kUav
  };
  Section section = Section::kTop;
  ChannelConfig* channel = nullptr;
  UavScenario* uav = nullptr;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) {
      line.erase(comment);
    }
    const auto tokens = tokenize(line);
    if (tokens.empty()) {
      continue;
    }

    if (line.find('[') != std::string::npos) {
      std::string header = line;
      header.erase(0, header.find('[') + 1);
      header.erase(header.find(']'));
      const auto parts = tokenize(header);
      const std::string& kind = parts.empty() ? header : parts[0];
      if (kind == "channel") {
        if (parts.size() != 2) {
          result.errors.push_back({line_no, "[channel] needs a name"});
          section = Section::kTop;
          continue;
        }
        scenario.channels.push_back(ChannelConfig{parts[1]});
        channel = &scenario.channels.back();
        section = Section::kChannel;
      } else if (kind == "avoidance") {
        section = Section::kAvoidance;
      } else if (kind == "broadcast") {
        section = Section::kBroadcast;
      } else if (kind == "uvdar") {
        section = Section::kUvdar;
        scenario.uvdar.enabled = true;
      } else if (kind == "gcs") {
        section = Section::kGcs;
        scenario.gcs.enabled = true;
      } else if (kind == "flocking") {
        section = Section::kFlocking;
      } else if (kind == "uav") {
        long id = 0;
        if (parts.size() != 2 || !p.to_int(parts[1], line_no, id)) {
          result.errors.push_back({line_no, "[uav] needs a numeric id"});
          section = Section::kTop;
          continue;
        }
        scenario.uavs.push_back(UavScenario{});
        uav = &scenario.uavs.back();
        uav->id = static_cast<UavId>(id);
        section = Section::kUav;
      } else {
        result.errors.push_back({line_no, "unknown section [" + kind + "]"});
        section = Section::kTop;
      }
      continue;
    }

    // key = value
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      result.errors.push_back({line_no, "expected 'key = value'"});
      continue;
    }
    const auto keys = tokenize(line.substr(0, eq));
    std::string value = line.substr(eq + 1);
    // trim
    const auto first = value.find_first_not_of(" \t");
    value = first == std::string::npos ? "" : value.substr(first);
    const auto last = value.find_last_not_of(" \t\r");
    if (last != std::string::npos) {
      value = value.substr(0, last + 1);
    }
    if (keys.size() != 1) {
      result.errors.push_back({line_no, "expected a single key before '='"});
      continue;
    }
    const std::string& key = keys[0];

    double d = 0.0;
    long i = 0;
    bool b = false;

    switch (section) {
      case Section::kTop:
        if (key == "seed") {
          if (p.to_int(value, line_no, i)) {
            scenario.seed = static_cast<std::uint64_t>(i);
          }
        } else if (key == "duration") {
          if (p.to_double(value, line_no, d)) {
            scenario.duration = d;
          }
        } else if (key == "ground_z") {
          if (p.to_double(value, line_no, d)) {
            scenario.ground_z = d;
          }
        } else {
          result.errors.push_back({line_no, "unknown top-level key '" + key + "'"});
        }
        break;

      case Section::kChannel:
        if (key == "preset") {
          const std::string name = channel->name;
          if (value == "lowband") {
            *channel = ChannelConfig::lowband(name);
          } else if (value == "highband") {
            *channel = ChannelConfig::highband(name);
          } else {
            result.errors.push_back({line_no, "unknown channel preset '" + value + "'"});
          }
        } else if (key == "bandwidth") {
          if (p.to_double(value, line_no, d)) channel->bandwidth = d;
        } else if (key == "latency") {
          if (p.to_double(value, line_no, d)) channel->latency = d;
        } else if (key == "loss") {
          if (p.to_double(value, line_no, d)) channel->loss_probability = d;
        } else if (key == "mtu") {
          if (p.to_int(value, line_no, i)) channel->mtu = static_cast<std::size_t>(i);
        } else {
          result.errors.push_back({line_no, "unknown channel key '" + key + "'"});
        }
        break;

      case Section::kAvoidance:
        if (key == "enabled") {
          if (p.to_bool(value, line_no, b)) scenario.avoidance.enabled = b;
        } else if (key == "r_min") {
          if (p.to_double(value, line_no, d)) scenario.avoidance.r_min = d;
        } else if (key == "trigger_radius") {
          if (p.to_double(value, line_no, d)) scenario.avoidance.trigger_radius = d;
        } else if (key == "altitude_offset") {
          if (p.to_double(value, line_no, d)) scenario.avoidance.altitude_offset = d;
        } else {
          result.errors.push_back({line_no, "unknown avoidance key '" + key + "'"});
        }
        break;

      case Section::kBroadcast:
        if (key == "channel") {
          scenario.broadcast.channel = value;
        } else if (key == "period") {
          if (p.to_double(value, line_no, d)) scenario.broadcast.period = d;
        } else if (key == "stride") {
          if (p.to_int(value, line_no, i)) scenario.broadcast.stride = static_cast<int>(i);
        } else if (key == "per_uav") {
          if (p.to_bool(value, line_no, b)) scenario.broadcast.per_uav = b;
        } else {
          result.errors.push_back({line_no, "unknown broadcast key '" + key + "'"});
        }
        break;

      case Section::kUvdar:
        if (key == "enabled") {
          if (p.to_bool(value, line_no, b)) scenario.uvdar.enabled = b;
        } else if (key == "length") {
          if (p.to_int(value, line_no, i)) scenario.uvdar.sequence.length = static_cast<int>(i);
        } else if (key == "max_off_run") {
          if (p.to_int(value, line_no, i)) scenario.uvdar.sequence.max_off_run = static_cast<int>(i);
        } else if (key == "fov_deg") {
          if (p.to_double(value, line_no, d)) scenario.uvdar.camera.fov = d * 0.017453292519943295;
        } else if (key == "resolution") {
          if (p.to_double(value, line_no, d)) scenario.uvdar.camera.resolution = d;
        } else if (key == "pixel_noise") {
          if (p.to_double(value, line_no, d)) scenario.uvdar.camera.pixel_noise_sigma = d;
        } else if (key == "cameras") {
          if (p.to_int(value, line_no, i)) scenario.uvdar.camera.cameras = static_cast<int>(i);
        } else if (key == "frame_rate") {
          if (p.to_double(value, line_no, d)) scenario.uvdar.frame_rate = d;
        } else if (key == "baseline") {
          if (p.to_double(value, line_no, d)) scenario.uvdar.baseline = d;
        } else {
          result.errors.push_back({line_no, "unknown uvdar key '" + key + "'"});
        }
        break;

      case Section::kGcs:
        if (key == "enabled") {
          if (p.to_bool(value, line_no, b)) scenario.gcs.enabled = b;
        } else if (key == "channel") {
          scenario.gcs.channel = value;
        } else {
          result.errors.push_back({line_no, "unknown gcs key '" + key + "'"});
        }
        break;

      case Section::kFlocking:
        if (key == "desired_distance") {
          if (p.to_double(value, line_no, d)) scenario.flocking.desired_distance = d;
        } else if (key == "cohesion") {
          if (p.to_double(value, line_no, d)) scenario.flocking.cohesion_gain = d;
        } else if (key == "separation") {
          if (p.to_double(value, line_no, d)) scenario.flocking.separation_gain = d;
        } else if (key == "alignment") {
          if (p.to_double(value, line_no, d)) scenario.flocking.alignment_gain = d;
        } else if (key == "max_speed") {
          if (p.to_double(value, line_no, d)) scenario.flocking.max_speed = d;
        } else if (key == "neighbor_timeout") {
          if (p.to_double(value, line_no, d)) scenario.flocking.neighbor_timeout = d;
        } else {
          result.errors.push_back({line_no, "unknown flocking key '" + key + "'"});
        }
        break;

      case Section::kUav: {
        if (key == "platform") {
          uav->platform = value;
        } else if (key == "curve") {
          uav->curve = value;
        } else if (key == "modifiers") {
          uav->modifiers = tokenize(value);
        } else if (key == "profile") {
          uav->profile = value;
        } else if (key == "priority") {
          if (p.to_int(value, line_no, i)) uav->priority = static_cast<int>(i);
        } else if (key == "start") {
          const auto parts = tokenize(value);
          double x = 0, y = 0, z = 0;
          if (parts.size() != 3 || !p.to_double(parts[0], line_no, x) ||
              !p.to_double(parts[1], line_no, y) ||
              !p.to_double(parts[2], line_no, z)) {
            result.errors.push_back({line_no, "start needs three coordinates"});
          } else {
            uav->start = Vec3(x, y, z);
          }
        } else if (key == "heading") {
          if (p.to_double(value, line_no, d)) uav->heading = d;
        } else if (key == "v_max_h") {
          if (p.to_double(value, line_no, d)) uav->constraints.v_max_h = d;
        } else if (key == "v_max_v") {
          if (p.to_double(value, line_no, d)) uav->constraints.v_max_v = d;
        } else if (key == "a_max_h") {
          if (p.to_double(value, line_no, d)) uav->constraints.a_max_h = d;
        } else if (key == "a_max_v") {
          if (p.to_double(value, line_no, d)) uav->constraints.a_max_v = d;
        } else if (key == "j_max") {
          if (p.to_double(value, line_no, d)) uav->constraints.j_max = d;
        } else if (key == "heading_rate_max") {
          if (p.to_double(value, line_no, d)) uav->constraints.heading_rate_max = d;
        } else if (key == "role") {
          if (value == "mission") {
            uav->role = UavRole::kMission;
          } else if (value == "flock") {
            uav->role = UavRole::kFlocking;
          } else {
            result.errors.push_back({line_no, "unknown role '" + value + "'"});
          }
        } else if (key == "takeoff") {
          if (p.to_double(value, line_no, d)) uav->takeoff_altitude = d;
        } else if (key == "waypoint") {
          const InlineRecord rec = parse_inline(value);
          double x = 0, y = 0, z = 0;
          if (rec.positional.size() != 3 ||
              !p.to_double(rec.positional[0], line_no, x) ||
              !p.to_double(rec.positional[1], line_no, y) ||
              !p.to_double(rec.positional[2], line_no, z)) {
            result.errors.push_back({line_no, "waypoint needs x y z"});
            break;
          }
          Waypoint wp;
          wp.command.position = Vec3(x, y, z);
          if (auto it = rec.options.find("heading"); it != rec.options.end()) {
            if (p.to_double(it->second, line_no, d)) wp.command.heading = d;
          }
          if (auto it = rec.options.find("tol"); it != rec.options.end()) {
            if (p.to_double(it->second, line_no, d)) wp.tolerance = d;
          }
          uav->waypoints.push_back(wp);
        } else if (key == "source") {
          const InlineRecord rec = parse_inline(value);
          if (rec.positional.size() != 1) {
            result.errors.push_back({line_no, "source needs a name"});
            break;
          }
          OdometrySpec spec;
          spec.name = rec.positional[0];
          for (const auto& [k, v] : rec.options) {
            if (k == "kind") {
              if (v == "gnss") {
                spec.config.kind = OdometryKind::kGnssLike;
              } else if (v == "slam") {
                spec.config.kind = OdometryKind::kSlamLike;
              } else if (v == "vio") {
                spec.config.kind = OdometryKind::kVioLike;
              } else {
                result.errors.push_back({line_no, "unknown source kind '" + v + "'"});
              }
            } else if (k == "rate") {
              if (p.to_double(v, line_no, d)) spec.config.rate = d;
            } else if (k == "pos_sigma") {
              if (p.to_double(v, line_no, d)) spec.config.position_noise_sigma = d;
            } else if (k == "hdg_sigma") {
              if (p.to_double(v, line_no, d)) spec.config.heading_noise_sigma = d;
            } else if (k == "drift_rate") {
              if (p.to_double(v, line_no, d)) spec.config.drift_rate = d;
            } else if (k == "latency") {
              if (p.to_double(v, line_no, d)) spec.config.latency = d;
            } else if (k == "dropout") {
              if (p.to_double(v, line_no, d)) spec.config.dropout_probability = d;
            } else {
              result.errors.push_back({line_no, "unknown source option '" + k + "'"});
            }
          }
          uav->sources.push_back(spec);
        } else if (key == "failsafe_at") {
          if (p.to_double(value, line_no, d)) uav->failsafe_at = d;
        } else if (key == "switch_source_at") {
          if (p.to_double(value, line_no, d)) uav->switch_source_at = d;
        } else if (key == "switch_source_to") {
          uav->switch_source_to = value;
        } else {
          result.errors.push_back({line_no, "unknown uav key '" + key + "'"});
        }
        break;
      }
    }
  }

  for (const auto& issue : validate_scenario(scenario, catalogs)) {
    result.errors.push_back(issue);
  }
  if (result.errors.empty()) {
    result.scenario = std::move(scenario);
  }
  return result;
}

std::vector<ScenarioIssue> validate_scenario(const Scenario& scenario,
                                             const Catalogs& catalogs) {
  std::vector<ScenarioIssue> errors;
  const auto fail = [&](const std::string& message) {
    errors.push_back({0, message});
  };

  if (scenario.duration <= 0.0) {
    fail("duration must be positive");
  }
  if (scenario.uavs.empty()) {
    fail("scenario defines no UAVs");
  }

  std::set<std::string> channel_names;
  for (const auto& ch : scenario.channels) {
    if (!channel_names.insert(ch.name).second) {
      fail("duplicate channel '" + ch.name + "'");
    }
    if (ch.bandwidth <= 0.0) {
      fail("channel '" + ch.name + "': bandwidth must be positive");
    }
    if (ch.loss_probability < 0.0 || ch.loss_probability > 1.0) {
      fail("channel '" + ch.name + "': loss must be in [0, 1]");
    }
    if (ch.mtu == 0) {
      fail("channel '" + ch.name + "': mtu must be positive");
    }
  }

  if (scenario.avoidance.enabled) {
    if (!(scenario.avoidance.trigger_radius > scenario.avoidance.r_min &&
          scenario.avoidance.r_min > 0.0)) {
      fail("avoidance requires trigger_radius > r_min > 0");
    }
    if (scenario.uavs.size() > 1 && !channel_names.count(scenario.broadcast.channel)) {
      fail("broadcast channel '" + scenario.broadcast.channel + "' is not defined");
    }
  }
  if (scenario.broadcast.stride < 1) {
    fail("broadcast stride must be >= 1");
  }
  if (scenario.gcs.enabled && !channel_names.count(scenario.gcs.channel)) {
    fail("gcs channel '" + scenario.gcs.channel + "' is not defined");
  }

  std::string available_platforms;
  for (const auto& [name, spec] : catalogs.platforms) {
    available_platforms += available_platforms.empty() ? name : ", " + name;
  }

  std::set<UavId> ids;
  std::set<int> priorities;
  bool any_flock = false;
  for (const auto& uav : scenario.uavs) {
    const std::string tag = "uav " + std::to_string(uav.id) + ": ";
    if (!ids.insert(uav.id).second) {
      fail("duplicate uav id " + std::to_string(uav.id));
    }
    if (!priorities.insert(uav.priority).second) {
      fail(tag + "duplicate priority " + std::to_string(uav.priority));
    }
    if (!catalogs.platforms.count(uav.platform)) {
      fail(tag + "unknown platform '" + uav.platform + "' (available: " +
           available_platforms + ")");
    }
    if (!catalogs.curves.count(uav.curve)) {
      fail(tag + "unknown propulsion curve '" + uav.curve + "'");
    }
    if (uav.profile != "smooth" && uav.profile != "aggressive") {
      fail(tag + "unknown controller profile '" + uav.profile + "'");
    }
    for (const auto& mod : uav.modifiers) {
      if (mod != "duct" && mod != "duct_full" && mod != "coax") {
        fail(tag + "unknown modifier '" + mod + "'");
      }
    }
    const auto& c = uav.constraints;
    if (c.v_max_h <= 0 || c.v_max_v <= 0 || c.a_max_h <= 0 || c.a_max_v <= 0 ||
        c.j_max <= 0 || c.heading_rate_max <= 0) {
      fail(tag + "tracker constraints must all be positive");
    }
    if (uav.sources.empty()) {
      fail(tag + "needs at least one odometry source");
    }
    std::set<std::string> source_names;
    for (const auto& src : uav.sources) {
      if (!source_names.insert(src.name).second) {
        fail(tag + "duplicate source '" + src.name + "'");
      }
      if (src.config.rate <= 0.0) {
        fail(tag + "source '" + src.name + "' rate must be positive");
      }
      if (src.config.dropout_probability < 0.0 ||
          src.config.dropout_probability > 1.0) {
        fail(tag + "source '" + src.name + "' dropout must be in [0, 1]");
      }
    }
    if (uav.role == UavRole::kMission && uav.waypoints.empty()) {
      fail(tag + "mission role needs at least one waypoint");
    }
    if (uav.role == UavRole::kFlocking) {
      any_flock = true;
      if (!uav.waypoints.empty()) {
        fail(tag + "flock role does not take waypoints");
      }
    }
    if (!uav.switch_source_to.empty() && !source_names.count(uav.switch_source_to)) {
      fail(tag + "switch_source_to names unknown source '" + uav.switch_source_to + "'");
    }
    for (const auto& wp : uav.waypoints) {
      if (wp.tolerance <= 0.0) {
        fail(tag + "waypoint tolerance must be positive");
      }
    }
  }

  if (any_flock && !scenario.uvdar.enabled) {
    fail("flocking requires the uvdar section");
  }
  if (scenario.uvdar.enabled) {
    const auto& sp = scenario.uvdar.sequence;
    if (sp.length < 2 || sp.max_off_run < 1 || sp.max_off_run >= sp.length) {
      fail("uvdar sequence params out of range");
    } else {
      const auto set = generate_set(sp);
      if (set.size() < scenario.uavs.size()) {
        fail("uvdar sequence set too small for " +
             std::to_string(scenario.uavs.size()) + " UAVs");
      }
    }
    if (scenario.uvdar.frame_rate <= 0.0) {
      fail("uvdar frame_rate must be positive");
    }
  }
  return errors;
}

}  // namespace mstack
