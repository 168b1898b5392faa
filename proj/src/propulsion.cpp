#include "mstack/propulsion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mstack {

namespace {

// Locates the row interval [i, i+1] bracketing the query and the blend factor.
struct Bracket {
  std::size_t lo;
  double alpha;
};

Bracket bracket_by(const PropulsionCurve& curve, double value,
                   double PropulsionPoint::* column) {
  const auto& pts = curve.points;
  std::size_t lo = 0;
  while (lo + 2 < pts.size() && pts[lo + 1].*column <= value) {
    ++lo;
  }
  const double a = pts[lo].*column;
  const double b = pts[lo + 1].*column;
  return {lo, (value - a) / (b - a)};
}

double interpolate(const PropulsionCurve& curve, double throttle,
                   double PropulsionPoint::* column) {
  if (curve.points.size() < 2) {
    throw EmptyCurve("curve '" + curve.name + "' has fewer than two rows");
  }
  if (throttle < curve.min_throttle() || throttle > curve.max_throttle()) {
    throw OutOfRange("throttle " + std::to_string(throttle) +
                     " % outside tabulated range of '" + curve.name + "'");
  }
  const Bracket br = bracket_by(curve, throttle, &PropulsionPoint::throttle);
  const double a = curve.points[br.lo].*column;
  const double b = curve.points[br.lo + 1].*column;
  return a + br.alpha * (b - a);
}

}  // namespace

std::vector<CurveViolation> validate_curve(const PropulsionCurve& curve) {
  if (curve.points.size() < 2) {
    throw EmptyCurve("curve '" + curve.name + "' has fewer than two rows");
  }
  std::vector<CurveViolation> violations;
  const auto& pts = curve.points;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i + 1].throttle <= pts[i].throttle) {
      violations.push_back({i + 1, "throttle not strictly increasing"});
    }
    if (pts[i + 1].thrust <= pts[i].thrust) {
      violations.push_back({i + 1, "thrust not strictly increasing"});
    }
    if (pts[i + 1].rpm <= pts[i].rpm) {
      violations.push_back({i + 1, "rpm not strictly increasing"});
    }
    if (pts[i + 1].current <= pts[i].current) {
      violations.push_back({i + 1, "current not strictly increasing"});
    }
    if (pts[i + 1].voltage > pts[i].voltage) {
      violations.push_back({i + 1, "voltage increasing (expected battery sag)"});
    }
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double derived = pts[i].derived_power();
    if (std::abs(derived - pts[i].power) > 0.005 * derived) {
      violations.push_back({i, "power column deviates more than 0.5 % from V*I"});
    }
  }
  return violations;
}

double thrust_at(const PropulsionCurve& curve, double throttle) {
  return interpolate(curve, throttle, &PropulsionPoint::thrust);
}

double current_at(const PropulsionCurve& curve, double throttle) {
  return interpolate(curve, throttle, &PropulsionPoint::current);
}

double voltage_at(const PropulsionCurve& curve, double throttle) {
  return interpolate(curve, throttle, &PropulsionPoint::voltage);
}

double throttle_for(const PropulsionCurve& curve, double thrust) {
  if (curve.points.size() < 2) {
    throw EmptyCurve("curve '" + curve.name + "' has fewer than two rows");
  }
  if (thrust > curve.max_thrust()) {
    throw Unreachable("thrust " + std::to_string(thrust) +
                      " N above curve maximum " +
                      std::to_string(curve.max_thrust()) + " N");
  }
  if (thrust < curve.min_thrust()) {
    throw OutOfRange("thrust " + std::to_string(thrust) +
                     " N below lowest tabulated row");
  }
  const Bracket br = bracket_by(curve, thrust, &PropulsionPoint::thrust);
  const auto& a = curve.points[br.lo];
  const auto& b = curve.points[br.lo + 1];
  return a.throttle + br.alpha * (b.throttle - a.throttle);
}

PropulsionCurve apply_modifier(const PropulsionCurve& curve,
                               const ConfigModifier& modifier) {
  PropulsionCurve out = curve;
  const double current_scale = modifier.current_factor * modifier.power_factor;
  for (auto& p : out.points) {
    p.thrust *= modifier.thrust_factor;
    p.current *= current_scale;
    p.power *= current_scale;  // voltage fixed, power follows current
    p.efficiency *= modifier.thrust_factor / current_scale;
  }
  return out;
}

HoverAnalysis hover_analysis(const PlatformSpec& spec,
                             const PropulsionCurve& curve,
                             const HoverOptions& options) {
  const PropulsionCurve effective =
      spec.layout == RotorLayout::kCoaxial
          ? apply_modifier(curve, ConfigModifier::coaxial())
          : curve;
  const double total_mass = spec.takeoff_mass + options.payload;
  const double per_motor = total_mass * kGravity / spec.rotor_count;
  const double throttle = throttle_for(effective, per_motor);
  const double per_motor_power =
      voltage_at(effective, throttle) * current_at(effective, throttle);
  const double power = spec.rotor_count * per_motor_power + options.avionics_power;
  const double endurance =
      options.usable_fraction * spec.battery_capacity / power * 60.0;
  return {per_motor, throttle, power, endurance};
}

namespace {

// Reads the next content line, skipping blanks and # comments.
bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') {
      return true;
    }
  }
  return false;
}

}  // namespace

PropulsionCurve load_curve(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open curve file " + path);
  }
  PropulsionCurve curve;
  curve.name = name;
  std::string line;
  next_content_line(in, line);  // header
  while (next_content_line(in, line)) {
    std::istringstream row(line);
    PropulsionPoint p{};
    if (!(row >> p.throttle >> p.thrust >> p.rpm >> p.voltage >> p.current >>
          p.power >> p.efficiency)) {
      throw Error("malformed row in " + path + ": " + line);
    }
    curve.points.push_back(p);
  }
  if (curve.points.size() < 2) {
    throw EmptyCurve("curve file " + path + " has fewer than two rows");
  }
  return curve;
}

std::vector<PlatformSpec> load_platforms(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open platform catalog " + path);
  }
  std::vector<PlatformSpec> specs;
  std::string line;
  next_content_line(in, line);  // header
  while (next_content_line(in, line)) {
    std::istringstream row(line);
    PlatformSpec s;
    std::string layout;
    if (!(row >> s.name >> s.takeoff_mass >> s.rotor_count >>
          s.battery_capacity >> s.prop_size >> s.dimension >>
          s.reference_flight_time >> layout)) {
      throw Error("malformed row in " + path + ": " + line);
    }
    if (layout == "flat") {
      s.layout = RotorLayout::kFlat;
    } else if (layout == "coaxial") {
      s.layout = RotorLayout::kCoaxial;
    } else {
      throw Error("unknown layout '" + layout + "' in " + path);
    }
    specs.push_back(s);
  }
  return specs;
}

}  // namespace mstack
