#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffnav {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Error kinds shared by every module.

class MapFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoPathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateTargetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidDetectionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Wraps any angle into (-pi, pi]. Throws std::invalid_argument on NaN/inf.
inline double normalize_angle(double a) {
  if (!std::isfinite(a)) {
    throw std::invalid_argument("normalize_angle: non-finite angle");
  }
  // remainder() is exact and lands in [-pi, pi]; only the lower edge needs folding.
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double distance(const Vec2& a, const Vec2& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

/// Robot pose in the map frame: millimetres and radians, theta in (-pi, pi].
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }

  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Per-step wheel travel in millimetres; negative is backward.
struct WheelDelta {
  double d_left = 0.0;
  double d_right = 0.0;

  friend bool operator==(const WheelDelta&, const WheelDelta&) = default;
};

/// Commanded body velocities: mm/s and rad/s (positive angular is counter-clockwise).
struct MotionCommand {
  double linear = 0.0;
  double angular = 0.0;

  bool is_stop() const { return linear == 0.0 && angular == 0.0; }

  friend bool operator==(const MotionCommand&, const MotionCommand&) = default;
};

struct RobotConfig {
  double wheelbase = 300.0;          // mm
  double body_radius = 150.0;        // mm
  double max_linear_speed = 300.0;   // mm/s
  double max_angular_speed = 0.8;    // rad/s
  double sonar_max_range = 3000.0;   // mm
  int sonar_count = 8;
  double camera_fov = deg_to_rad(60.0);
  int camera_frame_width = 640;      // px
  int camera_frame_height = 480;     // px

  void validate() const {
    if (!(wheelbase > 0.0)) throw std::invalid_argument("RobotConfig: wheelbase must be > 0");
    if (!(body_radius > 0.0)) throw std::invalid_argument("RobotConfig: body_radius must be > 0");
    if (!(max_linear_speed > 0.0) || !(max_angular_speed > 0.0)) {
      throw std::invalid_argument("RobotConfig: speeds must be > 0");
    }
    if (!(sonar_max_range > 0.0)) throw std::invalid_argument("RobotConfig: sonar_max_range must be > 0");
    if (sonar_count < 1) throw std::invalid_argument("RobotConfig: sonar_count must be >= 1");
    if (!(camera_fov > 0.0 && camera_fov < kPi)) {
      throw std::invalid_argument("RobotConfig: camera_fov must be in (0, pi)");
    }
    if (camera_frame_width <= 0 || camera_frame_height <= 0) {
      throw std::invalid_argument("RobotConfig: camera frame size must be positive");
    }
  }
};

/// Grid cell addressed by row (down, +y) and column (right, +x).
struct Cell {
  int row = 0;
  int col = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

inline constexpr double kDefaultResolution = 100.0;  // mm per cell

/// Occupancy grid. The origin is the outer corner of cell (0, 0); x runs along
/// columns and y along rows. Cells outside the grid are free space.
struct GridMap {
  int width = 0;
  int height = 0;
  double resolution = kDefaultResolution;
  std::vector<bool> occupied;  // row-major, width * height
  Cell start;
  std::vector<Cell> goals;

  bool in_bounds(Cell c) const {
    return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width;
  }

  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c.col);
  }

  bool is_occupied(Cell c) const { return in_bounds(c) && occupied[index(c)]; }

  bool is_goal(Cell c) const {
    for (const auto& g : goals) {
      if (g == c) return true;
    }
    return false;
  }

  double width_mm() const { return width * resolution; }
  double height_mm() const { return height * resolution; }

  friend bool operator==(const GridMap&, const GridMap&) = default;

  void validate() const {
    if (width <= 0 || height <= 0) throw MapFormatError("map has no cells");
    if (!(resolution > 0.0)) throw std::invalid_argument("map resolution must be > 0");
    if (occupied.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw MapFormatError("occupancy size does not match map dimensions");
    }
    if (!in_bounds(start)) throw MapFormatError("start cell out of bounds");
    if (is_occupied(start)) throw MapFormatError("start cell is occupied");
    if (goals.empty()) throw MapFormatError("map has no goal cell");
    for (const auto& g : goals) {
      if (!in_bounds(g)) throw MapFormatError("goal cell out of bounds");
      if (is_occupied(g)) throw MapFormatError("goal cell is occupied");
    }
  }
};

/// Centre of `cell` in the map frame.
inline Vec2 cell_to_world(const GridMap& map, Cell cell) {
  if (!map.in_bounds(cell)) {
    throw std::out_of_range("cell_to_world: cell (" + std::to_string(cell.row) + ", " +
                            std::to_string(cell.col) + ") outside " +
                            std::to_string(map.height) + "x" + std::to_string(map.width) +
                            " map");
  }
  return {(cell.col + 0.5) * map.resolution, (cell.row + 0.5) * map.resolution};
}

/// Cell containing world point `p`. May be out of bounds.
inline Cell world_to_cell(const GridMap& map, Vec2 p) {
  return {static_cast<int>(std::floor(p.y / map.resolution)),
          static_cast<int>(std::floor(p.x / map.resolution))};
}

/// World-frame waypoint list.
struct Path {
  std::vector<Vec2> nodes;

  friend bool operator==(const Path&, const Path&) = default;
};

}  // namespace diffnav
