#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "diffnav/core.hpp"

namespace diffnav::odom {

struct OdometryState {
  Pose pose;
  double accumulated_distance = 0.0;  // sum of |incremental distance|, mm
};

/// Dead-reckoning update from one pair of wheel travels.
///
/// Uses the midpoint-heading form: the translation is applied along
/// theta + dtheta / 2, where dd = (left + right) / 2 and
/// dtheta = (right - left) / wheelbase.
inline OdometryState integrate(const OdometryState& state, const WheelDelta& delta,
                               double wheelbase) {
  if (!(wheelbase > 0.0)) throw std::invalid_argument("integrate: wheelbase must be > 0");
  if (!std::isfinite(delta.d_left) || !std::isfinite(delta.d_right)) {
    throw std::invalid_argument("integrate: non-finite wheel delta");
  }
  const double dd = 0.5 * (delta.d_left + delta.d_right);
  const double dtheta = (delta.d_right - delta.d_left) / wheelbase;
  const double mid = state.pose.theta + dtheta / 2.0;

  OdometryState next;
  next.pose.x = state.pose.x + dd * std::cos(mid);
  next.pose.y = state.pose.y + dd * std::sin(mid);
  next.pose.theta = normalize_angle(state.pose.theta + dtheta);
  next.accumulated_distance = state.accumulated_distance + std::abs(dd);
  return next;
}

/// Signed turn (counter-clockwise positive) that makes `from` face `target`.
inline double heading_to(const Pose& from, Vec2 target) {
  const double dx = target.x - from.x;
  const double dy = target.y - from.y;
  if (dx == 0.0 && dy == 0.0) {
    throw DegenerateTargetError("heading_to: target coincides with current position");
  }
  return normalize_angle(std::atan2(dy, dx) - from.theta);
}

inline constexpr double kDefaultDistTolerance = 50.0;   // mm
inline constexpr double kDefaultAngleTolerance = 0.05;  // rad

struct WaypointPlan {
  std::vector<Vec2> waypoints;
  std::size_t current_index = 0;
  double dist_tolerance = kDefaultDistTolerance;
  double angle_tolerance = kDefaultAngleTolerance;

  bool finished() const { return current_index >= waypoints.size(); }
  std::size_t remaining() const { return finished() ? 0 : waypoints.size() - current_index; }
};

enum class StepPhase { rotate, drive, arrived };

struct WaypointStep {
  MotionCommand command;
  WaypointPlan plan;
  bool reached_goal = false;
  bool advanced = false;  // a waypoint was consumed this step
  StepPhase phase = StepPhase::drive;
};

/// One tick of the turn-then-drive follower. Rotation and translation are
/// never commanded together.
inline WaypointStep waypoint_step(const OdometryState& state, const WaypointPlan& plan,
                                  const RobotConfig& config) {
  if (plan.waypoints.empty()) throw InvalidStateError("waypoint_step: empty plan");
  if (plan.finished()) throw InvalidStateError("waypoint_step: plan already completed");
  if (!(plan.dist_tolerance > 0.0) || !(plan.angle_tolerance > 0.0)) {
    throw std::invalid_argument("waypoint_step: tolerances must be > 0");
  }

  WaypointStep out;
  out.plan = plan;
  const Vec2 target = plan.waypoints[plan.current_index];

  if (distance(state.pose.position(), target) < plan.dist_tolerance) {
    ++out.plan.current_index;
    out.advanced = true;
    out.reached_goal = out.plan.finished();
    out.phase = StepPhase::arrived;
    return out;
  }

  const double error = heading_to(state.pose, target);
  if (std::abs(error) > plan.angle_tolerance) {
    out.command.angular = std::copysign(config.max_angular_speed, error);
    out.phase = StepPhase::rotate;
  } else {
    out.command.linear = config.max_linear_speed;
    out.phase = StepPhase::drive;
  }
  return out;
}

}  // namespace diffnav::odom
