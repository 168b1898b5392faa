#pragma once

#include <string>
#include <vector>

#include "mstack/geometry.hpp"

namespace mstack {

// One static thrust-stand measurement row.
struct PropulsionPoint {
  double throttle;    // %
  double thrust;      // N
  double rpm;         // 1/min
  double voltage;     // V
  double current;     // A
  double power;       // W, as printed on the stand readout
  double efficiency;  // g/W, as printed on the stand readout

  double derived_power() const { return voltage * current; }
  double derived_efficiency() const {
    return (thrust / kGravity * 1000.0) / derived_power();
  }
};

struct CurveViolation {
  std::size_t row;  // index of the offending row
  std::string rule;
};

// Thrust-stand curve for one propeller, rows ordered by throttle.
struct PropulsionCurve {
  std::string name;
  std::vector<PropulsionPoint> points;

  double min_throttle() const { return points.front().throttle; }
  double max_throttle() const { return points.back().throttle; }
  double min_thrust() const { return points.front().thrust; }
  double max_thrust() const { return points.back().thrust; }
};

enum class RotorLayout { kFlat, kCoaxial };

// Catalog row describing one airframe.
struct PlatformSpec {
  std::string name;
  double takeoff_mass;          // kg, no payload
  int rotor_count;              // 4 or 8
  double battery_capacity;      // Wh
  double prop_size;             // inch
  double dimension;             // mm, main diagonal without propellers
  double reference_flight_time; // min, as reported for the real airframe
  RotorLayout layout{RotorLayout::kFlat};
};

// Multiplicative curve modifier for duct / coax configurations. power_factor
// is applied as an extra current factor at fixed battery voltage.
struct ConfigModifier {
  double thrust_factor{1.0};
  double current_factor{1.0};
  double power_factor{1.0};

  static ConfigModifier identity() { return {}; }
  // Ducted fan with ducting below the propeller: ~20 % thrust loss.
  static ConfigModifier duct_with_ducting() { return {0.80, 1.0, 1.0}; }
  // Ducted fan alone: ~5 % lower current draw.
  static ConfigModifier ducted_fan() { return {1.0, 0.95, 1.0}; }
  // Coaxial pair: ~20 % more power for the same thrust.
  static ConfigModifier coaxial() { return {1.0, 1.0, 1.20}; }
};

struct HoverAnalysis {
  double per_motor_thrust;   // N
  double throttle;           // %
  double electrical_power;   // W, all rotors + avionics
  double endurance;          // min
};

// Checks monotonicity and power consistency. Empty result means valid.
// Throws EmptyCurve for fewer than two rows.
std::vector<CurveViolation> validate_curve(const PropulsionCurve& curve);

// Piecewise-linear interpolation through the tabulated rows. Throws
// OutOfRange outside the tabulated throttle span (no extrapolation).
double thrust_at(const PropulsionCurve& curve, double throttle);
double current_at(const PropulsionCurve& curve, double throttle);
double voltage_at(const PropulsionCurve& curve, double throttle);

// Inverse of thrust_at; unique by monotonicity. Throws Unreachable above the
// tabulated maximum, OutOfRange below the minimum.
double throttle_for(const PropulsionCurve& curve, double thrust);

// Returns a new curve with thrust and current columns scaled; voltage and rpm
// are left untouched.
PropulsionCurve apply_modifier(const PropulsionCurve& curve,
                               const ConfigModifier& modifier);

struct HoverOptions {
  double payload{0.0};          // kg
  double usable_fraction{0.8};  // battery fraction spent before landing
  double avionics_power{120.0}; // W, computer + sensors + non-propulsive losses
};

// Steady-hover operating point and endurance prediction. Applies the coaxial
// modifier automatically for coaxial layouts. Throws Unreachable when the
// per-motor demand exceeds the curve maximum.
HoverAnalysis hover_analysis(const PlatformSpec& spec,
                             const PropulsionCurve& curve,
                             const HoverOptions& options = {});

// Plain-text tabular catalog IO. Files carry one header line followed by one
// whitespace-separated row per entry.
PropulsionCurve load_curve(const std::string& path, const std::string& name);
std::vector<PlatformSpec> load_platforms(const std::string& path);

}  // namespace mstack
