#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "pbound/parameter_box.hpp"

namespace pbound {

// One traffic-jam approach scenario. Speeds in km/h, aperture is the full
// radar cone angle in degrees.
struct ScenarioParams {
  double speed_ego = 0.0;
  double speed_target = 0.0;
  double aperture_angle = 0.0;

  std::array<double, 3> as_array() const { return {speed_ego, speed_target, aperture_angle}; }
  static ScenarioParams from_span(std::span<const double> x);

  bool operator==(const ScenarioParams&) const = default;
};

std::string to_string(const ScenarioParams& p);

// Constants of the kinematic model. Every field must be strictly positive.
struct PhysicsConfig {
  double curve_radius = 50.0;     // m
  double decel = 6.0;             // m/s^2
  double reaction_time = 0.5;     // s, detection to braking onset
  double radar_max_range = 150.0; // m
  double initial_gap = 100.0;     // m, arc distance ego -> target at t = 0
  double dt = 0.01;               // s
  double max_sim_time = 60.0;     // s

  // Throws UsageError on violation. When `box` is given, also checks that the
  // widest aperture in the box cannot already see the target at t = 0.
  void validate(const ParameterBox* box = nullptr) const;

  bool operator==(const PhysicsConfig&) const = default;
};

// Accepts either a JSON object or flat `key = value` lines ('#' comments).
// Unknown keys are rejected; missing keys keep their defaults.
PhysicsConfig parse_physics_config(std::string_view text, const std::string& source = "<config>");
PhysicsConfig load_physics_config(const std::string& path);

enum class Outcome { Collision, NoCollision };

std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view s);  // throws DataError

struct SimTrace {
  Outcome outcome = Outcome::NoCollision;
  // Arc gap when the target first entered the radar cone; empty when the ego
  // never closed in on the target.
  std::optional<double> detection_gap;
  double min_gap = 0.0;
  double time_to_outcome = 0.0;

  bool operator==(const SimTrace&) const = default;
};

inline constexpr double kmh_to_ms(double v) { return v / 3.6; }
inline constexpr double deg_to_rad(double deg) { return deg * 3.14159265358979323846 / 180.0; }

// Arc distance at which the target on the curve enters the radar cone: a lead
// point at arc distance s sits at bearing s / (2R) off the trailing heading.
double detection_distance(const ScenarioParams& p, const PhysicsConfig& c);

// Gap consumed between detection and speed match under constant deceleration.
double required_gap(const ScenarioParams& p, const PhysicsConfig& c);

// detection_distance - required_gap. Negative means collision.
double oracle_margin(const ScenarioParams& p, const PhysicsConfig& c);

// Closed-form outcome of the kinematic model.
Outcome oracle(const ScenarioParams& p, const PhysicsConfig& c);

// Time-stepped simulation. Throws NonTerminationError if neither a collision
// nor a speed match happens within max_sim_time.
SimTrace simulate(const ScenarioParams& p, const PhysicsConfig& c);

}  // namespace pbound
