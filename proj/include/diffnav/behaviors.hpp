#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffnav/core.hpp"

namespace diffnav::behaviors {

// ---------------------------------------------------------------------------
// Target tracking

struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double center_x() const { return 0.5 * (x_min + x_max); }
  double width() const { return x_max - x_min; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Output of any detector, simulated or otherwise.
struct Detection {
  std::string label;
  double confidence = 0.0;
  BoundingBox bbox;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Throws InvalidDetectionError unless the box is non-empty, inside
/// [0, frame_width] horizontally (and [0, frame_height] when given), and the
/// confidence is in [0, 1].
inline void validate_detection(const Detection& d, double frame_width,
                               double frame_height = std::numeric_limits<double>::infinity()) {
  const auto& b = d.bbox;
  if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max)) {
    throw InvalidDetectionError("detection '" + d.label + "': empty bounding box");
  }
  if (b.x_min < 0.0 || b.x_max > frame_width || b.y_min < 0.0 || b.y_max > frame_height) {
    throw InvalidDetectionError("detection '" + d.label + "': bounding box outside frame");
  }
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw InvalidDetectionError("detection '" + d.label + "': confidence outside [0, 1]");
  }
}

/// Index of the highest-confidence detection labelled `target_label`. Ties go
/// to the smaller x_min, then to the earlier entry.
inline std::optional<std::size_t> select_target_index(std::span<const Detection> detections,
                                                      const std::string& target_label) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& d = detections[i];
    if (d.label != target_label) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = detections[*best];
    if (d.confidence > b.confidence ||
        (d.confidence == b.confidence && d.bbox.x_min < b.bbox.x_min)) {
      best = i;
    }
  }
  return best;
}

inline std::optional<Detection> select_target(std::span<const Detection> detections,
                                              const std::string& target_label) {
  if (auto idx = select_target_index(detections, target_label)) return detections[*idx];
  return std::nullopt;
}

struct TrackerConfig {
  std::string target_label = "person";
  int segment_count = 3;
  double approach_distance = 500.0;   // mm; halt below this range
  double slowdown_distance = 1000.0;  // mm; pursuit speed ramps down below this range
  double pursuit_speed = 250.0;       // mm/s
  double turn_speed = 0.5;            // rad/s
  // Reproduces the literal "left segment -> right turn" mapping.
  bool invert_turns = false;

  void validate() const {
    if (segment_count < 3 || segment_count % 2 == 0) {
      throw std::invalid_argument("TrackerConfig: segment_count must be odd and >= 3");
    }
    if (!(approach_distance > 0.0)) {
      throw std::invalid_argument("TrackerConfig: approach_distance must be > 0");
    }
    if (!(pursuit_speed > 0.0) || !(turn_speed > 0.0)) {
      throw std::invalid_argument("TrackerConfig: speeds must be > 0");
    }
  }
};

enum class TrackZone { search, pursuit, approach, halted };

inline const char* to_string(TrackZone z) {
  switch (z) {
    case TrackZone::search: return "search";
    case TrackZone::pursuit: return "pursuit";
    case TrackZone::approach: return "approach";
    case TrackZone::halted: return "halted";
  }
  return "?";
}

struct TrackCommand {
  MotionCommand command;
  TrackZone zone = TrackZone::search;
};

/// Segment (0 = leftmost) holding the horizontal centre of `bbox`.
inline int segment_of(const BoundingBox& bbox, int segment_count, double frame_width) {
  const int seg = static_cast<int>(std::floor(bbox.center_x() / frame_width * segment_count));
  return std::clamp(seg, 0, segment_count - 1);
}

/// One tick of segment-based tracking.
///
/// No target: rotate in place to search. Target in the centre segment: drive
/// forward, slowing inside slowdown_distance. Off-centre: rotate toward the
/// target (image left is a counter-clockwise turn) at turn_speed scaled by the
/// segment offset. Inside approach_distance everything stops.
inline TrackCommand track_step(const std::optional<Detection>& target,
                               std::optional<double> range_to_target, const TrackerConfig& cfg,
                               double frame_width) {
  if (!(frame_width > 0.0)) throw std::invalid_argument("track_step: frame_width must be > 0");

  TrackCommand out;
  if (!target) {
    out.zone = TrackZone::search;
    out.command.angular = cfg.turn_speed;
    return out;
  }
  validate_detection(*target, frame_width);

  if (range_to_target && *range_to_target < cfg.approach_distance) {
    out.zone = TrackZone::halted;
    return out;
  }

  const bool near = range_to_target && *range_to_target < cfg.slowdown_distance;
  out.zone = near ? TrackZone::approach : TrackZone::pursuit;

  const int mid = cfg.segment_count / 2;
  const int offset = segment_of(target->bbox, cfg.segment_count, frame_width) - mid;
  if (offset == 0) {
    double speed = cfg.pursuit_speed;
    if (near) {
      const double ramp = (*range_to_target - cfg.approach_distance) /
                          (cfg.slowdown_distance - cfg.approach_distance);
      speed *= std::clamp(ramp, 0.25, 1.0);
    }
    out.command.linear = speed;
    return out;
  }

  const double scale = static_cast<double>(std::abs(offset)) / mid;
  double angular = (offset < 0 ? 1.0 : -1.0) * cfg.turn_speed * scale;
  if (cfg.invert_turns) angular = -angular;
  out.command.angular = angular;
  return out;
}

/// Pinhole range estimate from the apparent width of an object of known size.
inline double estimate_range(double bbox_width_px, double known_width_mm, double frame_width_px,
                             double camera_fov) {
  if (!(bbox_width_px > 0.0)) throw std::invalid_argument("estimate_range: empty box");
  const double focal_px = 0.5 * frame_width_px / std::tan(0.5 * camera_fov);
  return known_width_mm * focal_px / bbox_width_px;
}

// ---------------------------------------------------------------------------
// Obstacle avoidance

struct AvoidConfig {
  double threshold = 400.0;        // mm
  double backup_distance = 150.0;  // mm
  double escape_turn_min = kPi / 4.0;
  double escape_turn_max = 3.0 * kPi / 4.0;
  double turn_step = kPi / 8.0;    // rad per single-side avoidance turn
  double scan_angle_right = 10.0;  // servo degrees
  double scan_angle_left = 70.0;   // servo degrees
  double scan_turn_angle = kPi / 2.0;

  void validate() const {
    if (!(threshold > 0.0)) throw std::invalid_argument("AvoidConfig: threshold must be > 0");
    if (!(escape_turn_min > 0.0 && escape_turn_min <= escape_turn_max &&
          escape_turn_max <= kPi)) {
      throw std::invalid_argument("AvoidConfig: escape turn range must lie within (0, pi]");
    }
    if (backup_distance < 0.0) throw std::invalid_argument("AvoidConfig: negative backup");
  }
};

enum class AvoidKind { proceed, turn_left, turn_right, escape, scan_right, scan_left, backup, halt };

inline const char* to_string(AvoidKind k) {
  switch (k) {
    case AvoidKind::proceed: return "proceed";
    case AvoidKind::turn_left: return "turn_left";
    case AvoidKind::turn_right: return "turn_right";
    case AvoidKind::escape: return "escape";
    case AvoidKind::scan_right: return "scan_right";
    case AvoidKind::scan_left: return "scan_left";
    case AvoidKind::backup: return "backup";
    case AvoidKind::halt: return "halt";
  }
  return "?";
}

/// `magnitude` is radians for turns (escape carries its signed turn,
/// counter-clockwise positive, and implies a backup of
/// AvoidConfig::backup_distance first) and millimetres for backup.
struct AvoidAction {
  AvoidKind kind = AvoidKind::proceed;
  std::optional<double> magnitude;

  friend bool operator==(const AvoidAction&, const AvoidAction&) = default;
};

/// Relative bearings of a frontal sonar ring, leftmost (+pi/2) first, spread
/// evenly down to -pi/2. A single sensor looks straight ahead.
inline std::vector<double> sonar_bearings(int count) {
  if (count < 1) throw std::invalid_argument("sonar_bearings: count must be >= 1");
  if (count == 1) return {0.0};
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = kPi / 2.0 - kPi * i / (count - 1);
  }
  // Exact zero for the middle sensor of an odd ring.
  if (count % 2 == 1) out[static_cast<std::size_t>(count / 2)] = 0.0;
  return out;
}

struct RingMinima {
  double left = std::numeric_limits<double>::infinity();
  double right = std::numeric_limits<double>::infinity();
};

/// Left half is bearings in (0, pi), right half (-pi, 0); a sensor at exactly
/// zero counts for both.
inline RingMinima ring_minima(std::span<const double> readings) {
  const auto bearings = sonar_bearings(static_cast<int>(readings.size()));
  RingMinima m;
  for (std::size_t i = 0; i < readings.size(); ++i) {
    const double b = bearings[i];
    if (b >= 0.0 && b < kPi) m.left = std::min(m.left, readings[i]);
    if (b <= 0.0 && b > -kPi) m.right = std::min(m.right, readings[i]);
  }
  return m;
}

/// Sonar-ring avoidance: turn away from a one-sided obstacle, escape from a
/// corner trap (both sides blocked) or when stuck.
inline AvoidAction avoid_step_ring(std::span<const double> sonar, std::size_t expected_count,
                                   const AvoidConfig& cfg, bool stuck, std::mt19937_64& rng) {
  if (sonar.size() != expected_count) {
    throw std::invalid_argument("avoid_step_ring: expected " + std::to_string(expected_count) +
                                " sonar readings, got " + std::to_string(sonar.size()));
  }
  for (double r : sonar) {
    if (!(r >= 0.0)) throw std::invalid_argument("avoid_step_ring: negative sonar reading");
  }
  const RingMinima m = ring_minima(sonar);
  const bool left_blocked = m.left < cfg.threshold;
  const bool right_blocked = m.right < cfg.threshold;

  if (stuck || (left_blocked && right_blocked)) {
    std::uniform_real_distribution<double> turn(cfg.escape_turn_min, cfg.escape_turn_max);
    const double angle = turn(rng);
    // Away from the nearer side; ties turn right.
    const double sign = (m.left <= m.right) ? -1.0 : 1.0;
    return {AvoidKind::escape, sign * angle};
  }
  if (left_blocked) return {AvoidKind::turn_right, cfg.turn_step};
  if (right_blocked) return {AvoidKind::turn_left, cfg.turn_step};
  return {AvoidKind::proceed, std::nullopt};
}

// Rotating single-sensor avoidance: cruise, halt and back up, scan both
// sides, turn toward the longer range.

enum class ScanPhase { cruise, retreat, scan, turn };

struct ScanState {
  ScanPhase phase = ScanPhase::cruise;
  bool right_requested = false;
  std::optional<double> right_range;
  std::optional<double> left_range;

  friend bool operator==(const ScanState&, const ScanState&) = default;
};

struct RotatingStep {
  AvoidAction action;
  ScanState next;
};

/// `reading` is whatever the sensor measured at its current angle: straight
/// ahead while cruising, the right scan after scan_right and the left scan
/// after scan_left. Readings in retreat and at the first scan tick are ignored.
inline RotatingStep avoid_step_rotating(double reading, const AvoidConfig& cfg,
                                        const ScanState& state) {
  if (!(reading >= 0.0)) throw std::invalid_argument("avoid_step_rotating: negative range");

  RotatingStep out;
  switch (state.phase) {
    case ScanPhase::cruise:
      if (reading >= cfg.threshold) {
        out.action = {AvoidKind::proceed, std::nullopt};
        out.next = state;
      } else {
        out.action = {AvoidKind::halt, std::nullopt};
        out.next = ScanState{ScanPhase::retreat, false, std::nullopt, std::nullopt};
      }
      return out;

    case ScanPhase::retreat:
      out.action = {AvoidKind::backup, cfg.backup_distance};
      out.next = ScanState{ScanPhase::scan, false, std::nullopt, std::nullopt};
      return out;

    case ScanPhase::scan:
      if (!state.right_requested) {
        out.action = {AvoidKind::scan_right, std::nullopt};
        out.next = state;
        out.next.right_requested = true;
      } else {
        out.action = {AvoidKind::scan_left, std::nullopt};
        out.next = ScanState{ScanPhase::turn, true, reading, std::nullopt};
      }
      return out;

    case ScanPhase::turn: {
      const double right = state.right_range.value_or(0.0);
      const double left = reading;
      out.action = left > right ? AvoidAction{AvoidKind::turn_left, cfg.scan_turn_angle}
                                : AvoidAction{AvoidKind::turn_right, cfg.scan_turn_angle};
      out.next = ScanState{};
      return out;
    }
  }
  throw InvalidStateError("avoid_step_rotating: unknown phase");
}

// ---------------------------------------------------------------------------
// Stuck detection

struct MotionSample {
  Pose pose;
  MotionCommand command;
};

/// Fixed-capacity history of recent samples.
class MotionHistory {
 public:
  explicit MotionHistory(std::size_t capacity) : capacity_(capacity) {}

  void push(const MotionSample& s) {
    samples_.push_back(s);
    while (samples_.size() > capacity_) samples_.pop_front();
  }
  void clear() { samples_.clear(); }
  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<MotionSample>& samples() const { return samples_; }

 private:
  std::size_t capacity_;
  std::deque<MotionSample> samples_;
};

/// True when the last `window` positions fit in a box with diagonal below
/// `epsilon` although a translation was commanded somewhere in that window.
inline bool detect_stuck(const MotionHistory& history, std::size_t window, double epsilon) {
  if (window < 2) throw std::invalid_argument("detect_stuck: window must be >= 2");
  const auto& s = history.samples();
  if (s.size() < window) return false;

  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  bool commanded = false;
  for (auto it = s.end() - static_cast<std::ptrdiff_t>(window); it != s.end(); ++it) {
    min_x = std::min(min_x, it->pose.x);
    max_x = std::max(max_x, it->pose.x);
    min_y = std::min(min_y, it->pose.y);
    max_y = std::max(max_y, it->pose.y);
    commanded = commanded || it->command.linear != 0.0;
  }
  return commanded && std::hypot(max_x - min_x, max_y - min_y) < epsilon;
}

}  // namespace diffnav::behaviors
