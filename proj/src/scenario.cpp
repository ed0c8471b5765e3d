#include "pbound/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pbound/errors.hpp"

namespace pbound {

ScenarioParams ScenarioParams::from_span(std::span<const double> x) {
  if (x.size() != 3) throw UsageError("scenario point needs exactly 3 coordinates");
  return {x[0], x[1], x[2]};
}

std::string to_string(const ScenarioParams& p) {
  std::ostringstream os;
  os << "(speed_ego=" << p.speed_ego << " km/h, speed_target=" << p.speed_target
     << " km/h, aperture_angle=" << p.aperture_angle << " deg)";
  return os.str();
}

void PhysicsConfig::validate(const ParameterBox* box) const {
  const std::pair<const char*, double> fields[] = {
      {"curve_radius", curve_radius}, {"decel", decel},
      {"reaction_time", reaction_time}, {"radar_max_range", radar_max_range},
      {"initial_gap", initial_gap}, {"dt", dt}, {"max_sim_time", max_sim_time}};
  for (const auto& [name, value] : fields) {
    if (!(std::isfinite(value) && value > 0.0)) {
      throw UsageError(std::string("physics config: ") + name + " must be > 0");
    }
  }
  if (dt > 0.1) throw UsageError("physics config: dt must be <= 0.1 s");
  if (box != nullptr) {
    const double widest = deg_to_rad((*box)[box->index_of("aperture_angle")].upper);
    if (!(initial_gap > curve_radius * widest)) {
      throw UsageError("physics config: initial_gap must exceed curve_radius * max aperture");
    }
  }
}

namespace {

double* field_by_name(PhysicsConfig& c, std::string_view key) {
  if (key == "curve_radius") return &c.curve_radius;
  if (key == "decel") return &c.decel;
  if (key == "reaction_time") return &c.reaction_time;
  if (key == "radar_max_range") return &c.radar_max_range;
  if (key == "initial_gap") return &c.initial_gap;
  if (key == "dt") return &c.dt;
  if (key == "max_sim_time") return &c.max_sim_time;
  return nullptr;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

PhysicsConfig parse_physics_config(std::string_view text, const std::string& source) {
  PhysicsConfig c;
  const std::string_view body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(source + ": " + e.what());
    }
    for (const auto& [key, value] : j.items()) {
      double* slot = field_by_name(c, key);
      if (slot == nullptr) throw DataError(source + ": unknown physics key '" + key + "'");
      if (!value.is_number()) throw DataError(source + ": physics key '" + key + "' must be a number");
      *slot = value.get<double>();
    }
    return c;
  }

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    ++line_no;
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view val = trim(line.substr(eq + 1));
    double* slot = field_by_name(c, key);
    if (slot == nullptr) throw ParseError(source, line_no, "unknown physics key '" + std::string(key) + "'");
    double v = 0.0;
    const auto [end, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (ec != std::errc() || end != val.data() + val.size()) {
      throw ParseError(source, line_no, "bad number '" + std::string(val) + "'");
    }
    *slot = v;
  }
  return c;
}

PhysicsConfig load_physics_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open physics config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_physics_config(ss.str(), path);
}

std::string_view to_string(Outcome o) {
  return o == Outcome::Collision ? "collision" : "no_collision";
}

Outcome parse_outcome(std::string_view s) {
  if (s == "collision") return Outcome::Collision;
  if (s == "no_collision") return Outcome::NoCollision;
  throw DataError("unknown outcome '" + std::string(s) + "'");
}

double detection_distance(const ScenarioParams& p, const PhysicsConfig& c) {
  return std::min(c.radar_max_range, c.curve_radius * deg_to_rad(p.aperture_angle));
}

double required_gap(const ScenarioParams& p, const PhysicsConfig& c) {
  const double dv = kmh_to_ms(p.speed_ego - p.speed_target);
  if (dv <= 0.0) return 0.0;
  return dv * c.reaction_time + dv * dv / (2.0 * c.decel);
}

double oracle_margin(const ScenarioParams& p, const PhysicsConfig& c) {
  return detection_distance(p, c) - required_gap(p, c);
}

Outcome oracle(const ScenarioParams& p, const PhysicsConfig& c) {
  return detection_distance(p, c) < required_gap(p, c) ? Outcome::Collision : Outcome::NoCollision;
}

SimTrace simulate(const ScenarioParams& p, const PhysicsConfig& c) {
  const double v_target = kmh_to_ms(p.speed_target);
  const double sensing = detection_distance(p, c);
  const auto max_steps = static_cast<long long>(std::ceil(c.max_sim_time / c.dt));

  double v_ego = kmh_to_ms(p.speed_ego);
  double s_ego = 0.0;
  double s_target = c.initial_gap;
  double brake_time = std::numeric_limits<double>::infinity();

  // Moves the ego for `span` seconds at constant acceleration a (0 or -decel);
  // braking ends at the target speed.
  auto advance = [&](double span, double a) {
    if (span <= 0.0) return;
    if (a == 0.0) {
      s_ego += v_ego * span;
      return;
    }
    const double tm = (v_ego - v_target) / c.decel;
    if (tm <= span) {
      s_ego += v_ego * tm - 0.5 * c.decel * tm * tm + v_target * (span - tm);
      v_ego = v_target;
    } else {
      s_ego += v_ego * span - 0.5 * c.decel * span * span;
      v_ego -= c.decel * span;
    }
  };

  SimTrace trace;
  trace.min_gap = c.initial_gap;

  for (long long step = 0;; ++step) {
    const double t = static_cast<double>(step) * c.dt;
    const double gap = s_target - s_ego;
    if (gap <= 0.0) {
      trace.outcome = Outcome::Collision;
      trace.min_gap = 0.0;
      trace.time_to_outcome = t;
      return trace;
    }
    trace.min_gap = std::min(trace.min_gap, gap);
    // Ego no faster than the target: the gap can only grow from here on.
    if (v_ego <= v_target) {
      trace.outcome = Outcome::NoCollision;
      trace.time_to_outcome = t;
      return trace;
    }
    if (step >= max_steps) {
      throw NonTerminationError("simulation exceeded max_sim_time at " + to_string(p));
    }

    if (!trace.detection_gap) {
      // Constant speeds until detection, so the gap closes linearly.
      const double closing = v_ego - v_target;
      if (gap <= sensing) {
        trace.detection_gap = gap;
        brake_time = t + c.reaction_time;
      } else if (gap - closing * c.dt <= sensing) {
        trace.detection_gap = sensing;
        brake_time = t + (gap - sensing) / closing + c.reaction_time;
      }
    }

    const double split = std::clamp(brake_time - t, 0.0, c.dt);
    advance(split, 0.0);
    advance(c.dt - split, -c.decel);
    s_target += v_target * c.dt;
  }
}

}  // namespace pbound
