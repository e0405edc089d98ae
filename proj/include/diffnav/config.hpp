#pragma once

#include <cstdlib>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffnav/autopilot.hpp"
#include "diffnav/core.hpp"
#include "diffnav/simworld.hpp"
#include "json.hpp"

// JSON overrides, e.g.
//   {"robot": {"wheelbase": 330}, "tracker": {"target_label": "dog"},
//    "avoid": {"threshold": 500}, "encoder_noise_sigma": 0.01,
//    "targets": [{"label": "person", "x": 3000, "y": 2000, "radius": 200}]}
// Keys left out keep their defaults; unknown keys are rejected so typos surface.

namespace diffnav::config {

inline constexpr std::uint16_t kDefaultPort = 8765;
inline constexpr const char* kPortEnvVar = "DIFFNAV_PORT";

/// Port from DIFFNAV_PORT, else the built-in default.
inline std::uint16_t default_port() {
  if (const char* env = std::getenv(kPortEnvVar)) {
    try {
      const int p = std::stoi(env);
      if (p > 0 && p <= 65535) return static_cast<std::uint16_t>(p);
    } catch (const std::exception&) {
    }
  }
  return kDefaultPort;
}

struct Settings {
  RobotConfig robot;
  sim::AutopilotConfig autopilot;
  std::vector<sim::Target> targets;
  double encoder_noise_sigma = 0.0;
  double map_resolution = kDefaultResolution;
  double initial_heading = 0.0;
};

namespace detail {

using nlohmann::json;

template <typename T>
void take(const json& obj, const char* key, T& into) {
  if (auto it = obj.find(key); it != obj.end()) it->get_to(into);
}

inline void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                           const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + section);
  }
}

}  // namespace detail

inline Settings parse_settings(const nlohmann::json& j) {
  using detail::take;
  Settings s;
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  detail::reject_unknown(j, {"robot", "tracker", "avoid", "autopilot", "targets",
                             "encoder_noise_sigma", "map_resolution", "initial_heading"},
                         "top level");

  if (auto it = j.find("robot"); it != j.end()) {
    detail::reject_unknown(*it, {"wheelbase", "body_radius", "max_linear_speed",
                                 "max_angular_speed", "sonar_max_range", "sonar_count",
                                 "camera_fov", "camera_frame_width", "camera_frame_height"},
                           "robot");
    auto& r = s.robot;
    take(*it, "wheelbase", r.wheelbase);
    take(*it, "body_radius", r.body_radius);
    take(*it, "max_linear_speed", r.max_linear_speed);
    take(*it, "max_angular_speed", r.max_angular_speed);
    take(*it, "sonar_max_range", r.sonar_max_range);
    take(*it, "sonar_count", r.sonar_count);
    take(*it, "camera_fov", r.camera_fov);
    take(*it, "camera_frame_width", r.camera_frame_width);
    take(*it, "camera_frame_height", r.camera_frame_height);
  }
  if (auto it = j.find("tracker"); it != j.end()) {
    detail::reject_unknown(*it, {"target_label", "segment_count", "approach_distance",
                                 "slowdown_distance", "pursuit_speed", "turn_speed",
                                 "invert_turns"},
                           "tracker");
    auto& t = s.autopilot.tracker;
    take(*it, "target_label", t.target_label);
    take(*it, "segment_count", t.segment_count);
    take(*it, "approach_distance", t.approach_distance);
    take(*it, "slowdown_distance", t.slowdown_distance);
    take(*it, "pursuit_speed", t.pursuit_speed);
    take(*it, "turn_speed", t.turn_speed);
    take(*it, "invert_turns", t.invert_turns);
  }
  if (auto it = j.find("avoid"); it != j.end()) {
    detail::reject_unknown(*it, {"threshold", "backup_distance", "escape_turn_min",
                                 "escape_turn_max", "turn_step", "scan_angle_right",
                                 "scan_angle_left", "scan_turn_angle"},
                           "avoid");
    auto& a = s.autopilot.avoid;
    take(*it, "threshold", a.threshold);
    take(*it, "backup_distance", a.backup_distance);
    take(*it, "escape_turn_min", a.escape_turn_min);
    take(*it, "escape_turn_max", a.escape_turn_max);
    take(*it, "turn_step", a.turn_step);
    take(*it, "scan_angle_right", a.scan_angle_right);
    take(*it, "scan_angle_left", a.scan_angle_left);
    take(*it, "scan_turn_angle", a.scan_turn_angle);
  }
  if (auto it = j.find("autopilot"); it != j.end()) {
    detail::reject_unknown(*it, {"dist_tolerance", "angle_tolerance", "stuck_window",
                                 "stuck_epsilon", "tracking_avoids_obstacles", "sensor"},
                           "autopilot");
    auto& a = s.autopilot;
    take(*it, "dist_tolerance", a.dist_tolerance);
    take(*it, "angle_tolerance", a.angle_tolerance);
    take(*it, "stuck_window", a.stuck_window);
    take(*it, "stuck_epsilon", a.stuck_epsilon);
    take(*it, "tracking_avoids_obstacles", a.tracking_avoids_obstacles);
    if (auto sensor = it->find("sensor"); sensor != it->end()) {
      const auto name = sensor->get<std::string>();
      if (name == "ring") {
        a.avoid_sensor = sim::AvoidSensor::ring;
      } else if (name == "rotating") {
        a.avoid_sensor = sim::AvoidSensor::rotating;
      } else {
        throw std::invalid_argument("config: autopilot.sensor must be 'ring' or 'rotating'");
      }
    }
  }
  if (auto it = j.find("targets"); it != j.end()) {
    for (const auto& t : *it) {
      detail::reject_unknown(t, {"label", "x", "y", "radius"}, "targets");
      sim::Target target;
      target.label = t.value("label", std::string("person"));
      t.at("x").get_to(target.x);
      t.at("y").get_to(target.y);
      target.radius = t.value("radius", 200.0);
      s.targets.push_back(std::move(target));
    }
  }
  take(j, "encoder_noise_sigma", s.encoder_noise_sigma);
  take(j, "map_resolution", s.map_resolution);
  take(j, "initial_heading", s.initial_heading);

  s.robot.validate();
  s.autopilot.tracker.validate();
  s.autopilot.avoid.validate();
  if (s.encoder_noise_sigma < 0.0) throw std::invalid_argument("config: negative noise sigma");
  if (!(s.map_resolution > 0.0)) throw std::invalid_argument("config: map_resolution must be > 0");
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Settings load_settings(const std::string& path) {
  try {
    return parse_settings(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config '" + path + "': " + e.what());
  }
}

}  // namespace diffnav::config
