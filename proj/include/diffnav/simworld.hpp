#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffnav/behaviors.hpp"
#include "diffnav/core.hpp"

namespace diffnav::sim {

struct Target {
  std::string label;
  double x = 0.0;       // mm
  double y = 0.0;       // mm
  double radius = 0.0;  // mm

  friend bool operator==(const Target&, const Target&) = default;
};

/// Ground-truth simulation state.
struct WorldState {
  GridMap map;
  Pose robot_pose;
  RobotConfig robot;
  std::vector<Target> targets;
  std::int64_t sim_time_ms = 0;
  double camera_pan = 0.0;           // rad, relative to heading
  double encoder_noise_sigma = 0.0;  // multiplicative, per wheel
  std::mt19937_64 rng{0};
};

/// World with the robot at the centre of the map's start cell.
inline WorldState make_world(GridMap map, RobotConfig robot = {}, std::uint64_t seed = 0,
                             double initial_heading = 0.0) {
  map.validate();
  robot.validate();
  WorldState w;
  const Vec2 start = cell_to_world(map, map.start);
  w.robot_pose = {start.x, start.y, normalize_angle(initial_heading)};
  w.map = std::move(map);
  w.robot = robot;
  w.rng.seed(seed);
  return w;
}

/// Squared distance from point p to the axis-aligned box of `cell`.
inline double cell_distance_sq(const GridMap& map, Cell cell, Vec2 p) {
  const double x0 = cell.col * map.resolution;
  const double y0 = cell.row * map.resolution;
  const double dx = std::max({x0 - p.x, 0.0, p.x - (x0 + map.resolution)});
  const double dy = std::max({y0 - p.y, 0.0, p.y - (y0 + map.resolution)});
  return dx * dx + dy * dy;
}

/// True if a disk of `radius` at `p` overlaps any occupied cell.
inline bool disk_collides(const GridMap& map, Vec2 p, double radius) {
  const int r0 = static_cast<int>(std::floor((p.y - radius) / map.resolution));
  const int r1 = static_cast<int>(std::floor((p.y + radius) / map.resolution));
  const int c0 = static_cast<int>(std::floor((p.x - radius) / map.resolution));
  const int c1 = static_cast<int>(std::floor((p.x + radius) / map.resolution));
  const double r2 = radius * radius;
  for (int r = std::max(r0, 0); r <= std::min(r1, map.height - 1); ++r) {
    for (int c = std::max(c0, 0); c <= std::min(c1, map.width - 1); ++c) {
      if (map.occupied[map.index({r, c})] && cell_distance_sq(map, {r, c}, p) < r2) return true;
    }
  }
  return false;
}

/// Exact circular-arc motion for the given wheel travels.
inline Pose arc_motion(const Pose& p, const WheelDelta& d, double wheelbase) {
  const double dd = 0.5 * (d.d_left + d.d_right);
  const double dtheta = (d.d_right - d.d_left) / wheelbase;
  Pose out = p;
  if (std::abs(dtheta) < 1e-12) {
    out.x += dd * std::cos(p.theta);
    out.y += dd * std::sin(p.theta);
  } else {
    const double radius = dd / dtheta;
    out.x += radius * (std::sin(p.theta + dtheta) - std::sin(p.theta));
    out.y -= radius * (std::cos(p.theta + dtheta) - std::cos(p.theta));
  }
  out.theta = normalize_angle(p.theta + dtheta);
  return out;
}

inline MotionCommand clamp_command(const MotionCommand& cmd, const RobotConfig& robot) {
  return {std::clamp(cmd.linear, -robot.max_linear_speed, robot.max_linear_speed),
          std::clamp(cmd.angular, -robot.max_angular_speed, robot.max_angular_speed)};
}

struct StepResult {
  WheelDelta delta;  // as reported by the encoders
  WheelDelta true_delta;
  bool collided = false;
};

inline constexpr int kContactIterations = 8;

/// Advances ground truth by `dt_ms` under `cmd` (clamped to the robot's
/// limits). Motion that would overlap an occupied cell is cut back to the
/// last collision-free fraction of the step found by bisection.
inline StepResult step(WorldState& world, const MotionCommand& cmd, double dt_ms) {
  if (!(dt_ms > 0.0)) throw std::invalid_argument("step: dt must be > 0");
  const MotionCommand c = clamp_command(cmd, world.robot);
  const double dt = dt_ms / 1000.0;
  const double half_base = 0.5 * world.robot.wheelbase;
  const WheelDelta full{(c.linear - c.angular * half_base) * dt,
                        (c.linear + c.angular * half_base) * dt};

  const auto scaled = [&](double f) { return WheelDelta{full.d_left * f, full.d_right * f}; };
  const auto collides_at = [&](double f) {
    const Pose p = arc_motion(world.robot_pose, scaled(f), world.robot.wheelbase);
    return disk_collides(world.map, p.position(), world.robot.body_radius);
  };

  StepResult out;
  double fraction = 1.0;
  if (collides_at(1.0)) {
    out.collided = true;
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < kContactIterations; ++i) {
      const double mid = 0.5 * (lo + hi);
      (collides_at(mid) ? hi : lo) = mid;
    }
    fraction = lo;
  }
  out.true_delta = scaled(fraction);
  world.robot_pose = arc_motion(world.robot_pose, out.true_delta, world.robot.wheelbase);
  world.sim_time_ms += static_cast<std::int64_t>(std::llround(dt_ms));

  out.delta = out.true_delta;
  if (world.encoder_noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, world.encoder_noise_sigma);
    out.delta.d_left *= 1.0 + noise(world.rng);
    out.delta.d_right *= 1.0 + noise(world.rng);
  }
  return out;
}

/// Distance from `origin` along `bearing` (absolute, map frame) to the first
/// occupied cell boundary, capped at `max_range`. Grid traversal visits each
/// cell the ray crosses in order.
inline double cast_ray(const GridMap& map, Vec2 origin, double bearing, double max_range) {
  const double res = map.resolution;
  const double dir_x = std::cos(bearing);
  const double dir_y = std::sin(bearing);

  Cell cell = world_to_cell(map, origin);
  if (map.is_occupied(cell)) return 0.0;

  const int step_col = dir_x > 0.0 ? 1 : -1;
  const int step_row = dir_y > 0.0 ? 1 : -1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double delta_x = dir_x != 0.0 ? std::abs(res / dir_x) : kInf;
  const double delta_y = dir_y != 0.0 ? std::abs(res / dir_y) : kInf;

  const double cell_x0 = cell.col * res;
  const double cell_y0 = cell.row * res;
  double next_x = dir_x > 0.0   ? (cell_x0 + res - origin.x) / dir_x
                  : dir_x < 0.0 ? (cell_x0 - origin.x) / dir_x
                                : kInf;
  double next_y = dir_y > 0.0   ? (cell_y0 + res - origin.y) / dir_y
                  : dir_y < 0.0 ? (cell_y0 - origin.y) / dir_y
                                : kInf;

  while (true) {
    double t;
    if (next_x < next_y) {
      t = next_x;
      next_x += delta_x;
      cell.col += step_col;
    } else {
      t = next_y;
      next_y += delta_y;
      cell.row += step_row;
    }
    if (t >= max_range) return max_range;
    if (map.is_occupied(cell)) return std::max(t, 0.0);
  }
}

inline std::vector<double> sonar_scan(const WorldState& world) {
  const auto bearings = behaviors::sonar_bearings(world.robot.sonar_count);
  std::vector<double> out;
  out.reserve(bearings.size());
  for (double b : bearings) {
    out.push_back(cast_ray(world.map, world.robot_pose.position(), world.robot_pose.theta + b,
                           world.robot.sonar_max_range));
  }
  return out;
}

/// Servo-mounted sensor: 90 degrees looks straight ahead, 0 fully right.
inline double rotating_range(const WorldState& world, double servo_angle_deg) {
  if (!(servo_angle_deg >= 0.0 && servo_angle_deg <= 180.0)) {
    throw std::invalid_argument("rotating_range: servo angle must be in [0, 180]");
  }
  const double bearing = deg_to_rad(servo_angle_deg - 90.0);
  return cast_ray(world.map, world.robot_pose.position(), world.robot_pose.theta + bearing,
                  world.robot.sonar_max_range);
}

struct Observation {
  behaviors::Detection detection;
  std::size_t target_index = 0;
  double range = 0.0;  // ground truth, mm
};

/// Simulated detector with ground truth attached. A target is visible when its
/// bearing from the optical axis is within half the field of view and no wall
/// lies on the line of sight. Positive (counter-clockwise) bearings land on the
/// left of the image.
inline std::vector<Observation> camera_observe(const WorldState& world) {
  const auto& cfg = world.robot;
  const double frame_w = cfg.camera_frame_width;
  const double frame_h = cfg.camera_frame_height;
  const double axis = world.robot_pose.theta + world.camera_pan;

  std::vector<Observation> out;
  for (std::size_t i = 0; i < world.targets.size(); ++i) {
    const auto& t = world.targets[i];
    const double dx = t.x - world.robot_pose.x;
    const double dy = t.y - world.robot_pose.y;
    const double range = std::hypot(dx, dy);
    if (range <= t.radius || range == 0.0) continue;
    const double bearing = normalize_angle(std::atan2(dy, dx) - axis);
    if (std::abs(bearing) > 0.5 * cfg.camera_fov) continue;
    const double clear = cast_ray(world.map, world.robot_pose.position(), std::atan2(dy, dx),
                                  range);
    if (clear < range) continue;

    const double center = frame_w * (0.5 - bearing / cfg.camera_fov);
    const double width = frame_w * (2.0 * std::atan(t.radius / range)) / cfg.camera_fov;
    const double height = std::min(frame_h, 2.0 * width);

    behaviors::Detection d;
    d.label = t.label;
    d.confidence = std::clamp(1.0 - range / (4.0 * cfg.sonar_max_range), 0.5, 1.0);
    d.bbox.x_min = std::clamp(center - 0.5 * width, 0.0, frame_w);
    d.bbox.x_max = std::clamp(center + 0.5 * width, 0.0, frame_w);
    d.bbox.y_min = std::clamp(0.5 * (frame_h - height), 0.0, frame_h);
    d.bbox.y_max = std::clamp(0.5 * (frame_h + height), 0.0, frame_h);
    if (!(d.bbox.x_min < d.bbox.x_max) || !(d.bbox.y_min < d.bbox.y_max)) continue;
    out.push_back({std::move(d), i, range});
  }
  return out;
}

inline std::vector<behaviors::Detection> camera_detect(const WorldState& world) {
  std::vector<behaviors::Detection> out;
  for (auto& obs : camera_observe(world)) out.push_back(std::move(obs.detection));
  return out;
}

}  // namespace diffnav::sim
