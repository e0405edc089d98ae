#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "diffnav/behaviors.hpp"
#include "diffnav/core.hpp"
#include "diffnav/odometry.hpp"
#include "diffnav/planner.hpp"
#include "diffnav/simworld.hpp"
#include "diffnav/telemetry.hpp"

namespace diffnav::sim {

enum class Mode { idle, manual, odometry, tracking, avoidance };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::idle: return "idle";
    case Mode::manual: return "manual";
    case Mode::odometry: return "odometry";
    case Mode::tracking: return "tracking";
    case Mode::avoidance: return "avoidance";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : {Mode::idle, Mode::manual, Mode::odometry, Mode::tracking, Mode::avoidance}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

enum class EventKind { waypoint_reached, goal_reached, corner_trap, halted_at_target, no_path };

inline const char* to_string(EventKind e) {
  switch (e) {
    case EventKind::waypoint_reached: return "waypoint_reached";
    case EventKind::goal_reached: return "goal_reached";
    case EventKind::corner_trap: return "corner_trap";
    case EventKind::halted_at_target: return "halted_at_target";
    case EventKind::no_path: return "no_path";
  }
  return "?";
}

inline std::optional<EventKind> parse_event(std::string_view s) {
  for (EventKind e : {EventKind::waypoint_reached, EventKind::goal_reached,
                      EventKind::corner_trap, EventKind::halted_at_target, EventKind::no_path}) {
    if (s == to_string(e)) return e;
  }
  return std::nullopt;
}

/// Which obstacle sensor drives avoidance mode.
enum class AvoidSensor { ring, rotating };

struct AutopilotConfig {
  double dist_tolerance = odom::kDefaultDistTolerance;
  double angle_tolerance = odom::kDefaultAngleTolerance;
  behaviors::TrackerConfig tracker;
  behaviors::AvoidConfig avoid;
  AvoidSensor avoid_sensor = AvoidSensor::ring;
  // Tracking also runs ring avoidance while driving toward the target.
  bool tracking_avoids_obstacles = true;
  std::size_t stuck_window = 20;
  double stuck_epsilon = 20.0;    // mm
  double planning_margin = 10.0;  // mm added to the body radius when inflating walls
};

struct WaypointArrival {
  std::size_t index = 0;
  Vec2 waypoint;
  double true_error = 0.0;  // ground-truth distance at the moment of arrival, mm
};

struct TickResult {
  TelemetryFrame frame;
  std::vector<EventKind> events;
  std::optional<WaypointArrival> arrival;
  MotionCommand command;  // as commanded, before clamping
  bool collided = false;
};

/// Runs the selected behaviour one tick at a time against a WorldState. Owns
/// the odometry estimate, the active plan and any multi-tick manoeuvre.
class Autopilot {
 public:
  explicit Autopilot(AutopilotConfig cfg = {}) : cfg_(std::move(cfg)), history_(cfg_.stuck_window) {
    cfg_.tracker.validate();
    cfg_.avoid.validate();
  }

  const AutopilotConfig& config() const { return cfg_; }
  Mode mode() const { return mode_; }
  bool finished() const { return finished_; }
  const odom::OdometryState& odometry() const { return odom_; }
  const std::optional<odom::WaypointPlan>& plan() const { return plan_; }
  double servo_angle() const { return servo_deg_; }

  void set_target_label(std::string label) { cfg_.tracker.target_label = std::move(label); }

  /// Re-anchors the odometry estimate on the ground-truth pose and drops all
  /// behaviour state.
  void reset(const WorldState& world) {
    odom_ = {world.robot_pose, 0.0};
    clear_behaviour_state();
    plan_.reset();
    finished_ = false;
  }

  /// Switches mode, halting first. Entering odometry mode without an explicit
  /// plan plans from the current position; an unreachable goal yields no_path
  /// and leaves the autopilot idle.
  std::vector<EventKind> set_mode(Mode mode, const WorldState& world) {
    clear_behaviour_state();
    finished_ = false;
    mode_ = mode;
    if (mode == Mode::odometry && !plan_) {
      if (!replan(world)) {
        mode_ = Mode::idle;
        return {EventKind::no_path};
      }
    }
    return {};
  }

  void set_waypoints(std::vector<Vec2> waypoints) {
    odom::WaypointPlan p;
    p.waypoints = std::move(waypoints);
    p.dist_tolerance = cfg_.dist_tolerance;
    p.angle_tolerance = cfg_.angle_tolerance;
    plan_ = std::move(p);
    finished_ = false;
  }

  void clear_plan() { plan_.reset(); }

  /// A* over walls inflated by the body radius (falling back to the raw map),
  /// simplified to turn points. The first node, the current cell, is dropped.
  bool replan(const WorldState& world) {
    GridMap map = world.map;
    const Cell here = world_to_cell(map, odom_.pose.position());
    if (map.in_bounds(here) && !map.is_occupied(here)) map.start = here;

    std::optional<planner::GridPath> path;
    const double radius = world.robot.body_radius + cfg_.planning_margin;
    for (const GridMap& candidate : {planner::inflate(map, radius), map}) {
      try {
        path = planner::astar(candidate);
        break;
      } catch (const NoPathError&) {
      } catch (const MapFormatError&) {
      }
    }
    if (!path) {
      plan_.reset();
      return false;
    }
    auto nodes = planner::to_waypoints(*path, map).nodes;
    if (!nodes.empty()) nodes.erase(nodes.begin());
    if (nodes.empty()) nodes.push_back(cell_to_world(map, path->cells.back()));
    set_waypoints(std::move(nodes));
    return true;
  }

  /// Advances one tick. `manual` is only applied in manual mode.
  TickResult tick(WorldState& world, double tick_ms, const MotionCommand& manual = {}) {
    if (!(tick_ms > 0.0)) throw std::invalid_argument("tick: tick_ms must be > 0");
    TickResult out;
    const std::vector<double> sonar = sonar_scan(world);
    std::string label;
    MotionCommand cmd;

    switch (mode_) {
      case Mode::idle:
        label = "idle";
        break;
      case Mode::manual:
        cmd = manual;
        label = manual.is_stop() ? "stop" : "drive";
        break;
      case Mode::odometry:
        cmd = odometry_command(world, out, label);
        break;
      case Mode::tracking:
        cmd = tracking_command(world, sonar, tick_ms, out, label);
        break;
      case Mode::avoidance:
        cmd = cfg_.avoid_sensor == AvoidSensor::ring
                  ? ring_command(world, sonar, tick_ms, out, label)
                  : rotating_command(world, tick_ms, label);
        break;
    }

    const StepResult step_result = step(world, cmd, tick_ms);
    const odom::OdometryState before = odom_;
    odom_ = odom::integrate(odom_, step_result.delta, world.robot.wheelbase);
    advance_maneuver(before, step_result);
    history_.push({odom_.pose, cmd});

    out.command = cmd;
    out.collided = step_result.collided;
    const double dt = tick_ms / 1000.0;
    out.frame.timestamp_ms = world.sim_time_ms;
    out.frame.x = world.robot_pose.x;
    out.frame.y = world.robot_pose.y;
    out.frame.theta = world.robot_pose.theta;
    out.frame.v_left = step_result.delta.d_left / dt;
    out.frame.v_right = step_result.delta.d_right / dt;
    out.frame.mode = to_string(mode_);
    out.frame.sonar = sonar_scan(world);
    out.frame.zone_or_action = std::move(label);
    return out;
  }

 private:
  enum class ManeuverKind { backup, rotate };

  struct Maneuver {
    ManeuverKind kind;
    double remaining;  // mm or rad
    double sign;
  };

  void clear_behaviour_state() {
    maneuvers_.clear();
    history_.clear();
    scan_ = {};
    servo_deg_ = 90.0;
  }

  MotionCommand maneuver_command(double tick_ms, const RobotConfig& robot) const {
    const Maneuver& m = maneuvers_.front();
    const double dt = tick_ms / 1000.0;
    MotionCommand cmd;
    if (m.kind == ManeuverKind::backup) {
      cmd.linear = -std::min(robot.max_linear_speed, m.remaining / dt);
    } else {
      cmd.angular = m.sign * std::min(robot.max_angular_speed, m.remaining / dt);
    }
    return cmd;
  }

  void advance_maneuver(const odom::OdometryState& before, const StepResult& r) {
    if (maneuvers_.empty()) return;
    Maneuver& m = maneuvers_.front();
    if (m.kind == ManeuverKind::backup) {
      m.remaining -= std::abs(odom_.accumulated_distance - before.accumulated_distance);
      // Backing into something ends the manoeuvre.
      if (r.collided) m.remaining = 0.0;
    } else {
      m.remaining -= std::abs(normalize_angle(odom_.pose.theta - before.pose.theta));
    }
    if (m.remaining <= 1e-9) maneuvers_.pop_front();
  }

  void push_rotation(double signed_angle) {
    if (signed_angle != 0.0) {
      maneuvers_.push_back({ManeuverKind::rotate, std::abs(signed_angle),
                            signed_angle > 0.0 ? 1.0 : -1.0});
    }
  }

  MotionCommand odometry_command(const WorldState& world, TickResult& out, std::string& label) {
    if (finished_ || !plan_ || plan_->finished()) {
      label = "stop";
      return {};
    }
    const auto s = odom::waypoint_step(odom_, *plan_, world.robot);
    if (s.advanced) {
      const std::size_t idx = plan_->current_index;
      const Vec2 wp = plan_->waypoints[idx];
      out.arrival = WaypointArrival{idx, wp, distance(world.robot_pose.position(), wp)};
      out.events.push_back(EventKind::waypoint_reached);
    }
    plan_ = s.plan;
    if (s.reached_goal) {
      out.events.push_back(EventKind::goal_reached);
      finished_ = true;
    }
    switch (s.phase) {
      case odom::StepPhase::rotate: label = "rotate"; break;
      case odom::StepPhase::drive: label = "drive"; break;
      case odom::StepPhase::arrived: label = "waypoint"; break;
    }
    return s.command;
  }

  MotionCommand ring_command(WorldState& world, const std::vector<double>& sonar, double tick_ms,
                             TickResult& out, std::string& label) {
    if (!maneuvers_.empty()) {
      label = maneuvers_.front().kind == ManeuverKind::backup ? "backup" : "turning";
      return maneuver_command(tick_ms, world.robot);
    }
    const bool stuck = behaviors::detect_stuck(history_, cfg_.stuck_window, cfg_.stuck_epsilon);
    const auto action = behaviors::avoid_step_ring(
        sonar, static_cast<std::size_t>(world.robot.sonar_count), cfg_.avoid, stuck, world.rng);
    label = behaviors::to_string(action.kind);
    switch (action.kind) {
      case behaviors::AvoidKind::proceed:
        return {world.robot.max_linear_speed, 0.0};
      case behaviors::AvoidKind::turn_left:
        push_rotation(action.magnitude.value_or(cfg_.avoid.turn_step));
        break;
      case behaviors::AvoidKind::turn_right:
        push_rotation(-action.magnitude.value_or(cfg_.avoid.turn_step));
        break;
      case behaviors::AvoidKind::escape: {
        const auto m = behaviors::ring_minima(sonar);
        if (m.left < cfg_.avoid.threshold && m.right < cfg_.avoid.threshold) {
          out.events.push_back(EventKind::corner_trap);
        }
        if (cfg_.avoid.backup_distance > 0.0) {
          maneuvers_.push_back({ManeuverKind::backup, cfg_.avoid.backup_distance, -1.0});
        }
        push_rotation(action.magnitude.value_or(0.0));
        history_.clear();
        break;
      }
      default:
        break;
    }
    if (maneuvers_.empty()) return {};
    return maneuver_command(tick_ms, world.robot);
  }

  MotionCommand rotating_command(WorldState& world, double tick_ms, std::string& label) {
    if (!maneuvers_.empty()) {
      label = maneuvers_.front().kind == ManeuverKind::backup ? "backup" : "turning";
      return maneuver_command(tick_ms, world.robot);
    }
    double reading = rotating_range(world, servo_deg_);
    if (scan_.phase == behaviors::ScanPhase::cruise &&
        behaviors::detect_stuck(history_, cfg_.stuck_window, cfg_.stuck_epsilon)) {
      reading = 0.0;
      history_.clear();
    }
    const auto s = behaviors::avoid_step_rotating(reading, cfg_.avoid, scan_);
    scan_ = s.next;
    label = behaviors::to_string(s.action.kind);
    switch (s.action.kind) {
      case behaviors::AvoidKind::proceed:
        servo_deg_ = 90.0;
        return {world.robot.max_linear_speed, 0.0};
      case behaviors::AvoidKind::backup:
        maneuvers_.push_back({ManeuverKind::backup, s.action.magnitude.value_or(0.0), -1.0});
        return maneuver_command(tick_ms, world.robot);
      case behaviors::AvoidKind::scan_right:
        servo_deg_ = cfg_.avoid.scan_angle_right;
        return {};
      case behaviors::AvoidKind::scan_left:
        servo_deg_ = cfg_.avoid.scan_angle_left;
        return {};
      case behaviors::AvoidKind::turn_left:
      case behaviors::AvoidKind::turn_right: {
        servo_deg_ = 90.0;
        const double angle = s.action.magnitude.value_or(cfg_.avoid.scan_turn_angle);
        push_rotation(s.action.kind == behaviors::AvoidKind::turn_left ? angle : -angle);
        return maneuver_command(tick_ms, world.robot);
      }
      default:
        return {};
    }
  }

  MotionCommand tracking_command(WorldState& world, const std::vector<double>& sonar,
                                 double tick_ms, TickResult& out, std::string& label) {
    if (finished_) {
      label = behaviors::to_string(behaviors::TrackZone::halted);
      return {};
    }
    if (!maneuvers_.empty()) {
      label = maneuvers_.front().kind == ManeuverKind::backup ? "backup" : "turning";
      return maneuver_command(tick_ms, world.robot);
    }

    const auto observations = camera_observe(world);
    std::vector<behaviors::Detection> detections;
    detections.reserve(observations.size());
    for (const auto& o : observations) detections.push_back(o.detection);

    std::optional<behaviors::Detection> target;
    std::optional<double> range;
    if (auto idx = behaviors::select_target_index(detections, cfg_.tracker.target_label)) {
      target = detections[*idx];
      range = observations[*idx].range;
    }
    const auto tc = behaviors::track_step(target, range, cfg_.tracker,
                                          static_cast<double>(world.robot.camera_frame_width));
    label = behaviors::to_string(tc.zone);
    if (tc.zone == behaviors::TrackZone::halted) {
      out.events.push_back(EventKind::halted_at_target);
      finished_ = true;
      return {};
    }
    if (cfg_.tracking_avoids_obstacles && tc.command.linear > 0.0) {
      std::string avoid_label;
      const MotionCommand avoid = ring_command(world, sonar, tick_ms, out, avoid_label);
      if (avoid_label != behaviors::to_string(behaviors::AvoidKind::proceed)) {
        label = avoid_label;
        return avoid;
      }
    }
    return tc.command;
  }

  AutopilotConfig cfg_;
  Mode mode_ = Mode::idle;
  bool finished_ = false;
  odom::OdometryState odom_;
  std::optional<odom::WaypointPlan> plan_;
  std::deque<Maneuver> maneuvers_;
  behaviors::MotionHistory history_;
  behaviors::ScanState scan_;
  double servo_deg_ = 90.0;
};

struct EpisodeConfig {
  Mode mode = Mode::idle;
  double tick_ms = 100.0;
  std::size_t max_ticks = 1000;
  AutopilotConfig autopilot;
  // Explicit odometry waypoints in the map frame; planned from the map when empty.
  std::optional<std::vector<Vec2>> waypoints;
};

struct EpisodeReport {
  std::size_t ticks_used = 0;
  std::size_t collisions = 0;  // ticks whose motion was cut short by contact
  bool goal_reached = false;
  bool halted_at_target = false;
  std::size_t corner_traps = 0;
  std::vector<WaypointArrival> arrivals;
  std::vector<EventKind> events;
  Pose final_pose;
  Pose final_estimate;
  bool failed = false;
  std::string error;
};

/// Runs one behaviour until it completes (goal reached, halted at target),
/// fails, or hits max_ticks. Emits exactly one frame per tick.
inline EpisodeReport run_episode(WorldState& world, const EpisodeConfig& cfg,
                                 const TelemetrySink& sink = {}) {
  EpisodeReport report;
  try {
    if (!(cfg.tick_ms > 0.0)) throw std::invalid_argument("run_episode: tick_ms must be > 0");
    Autopilot pilot(cfg.autopilot);
    pilot.reset(world);
    if (cfg.waypoints) pilot.set_waypoints(*cfg.waypoints);
    for (EventKind e : pilot.set_mode(cfg.mode, world)) {
      report.events.push_back(e);
      if (e == EventKind::no_path) {
        report.failed = true;
        report.error = "no path to any goal";
      }
    }

    while (!report.failed && report.ticks_used < cfg.max_ticks && !pilot.finished()) {
      TickResult t = pilot.tick(world, cfg.tick_ms);
      ++report.ticks_used;
      if (t.collided) ++report.collisions;
      if (t.arrival) report.arrivals.push_back(*t.arrival);
      for (EventKind e : t.events) {
        report.events.push_back(e);
        if (e == EventKind::goal_reached) report.goal_reached = true;
        if (e == EventKind::halted_at_target) report.halted_at_target = true;
        if (e == EventKind::corner_trap) ++report.corner_traps;
      }
      if (sink) sink(t.frame);
    }
    report.final_estimate = pilot.odometry().pose;
  } catch (const std::exception& e) {
    report.failed = true;
    report.error = e.what();
  }
  report.final_pose = world.robot_pose;
  return report;
}

}  // namespace diffnav::sim
