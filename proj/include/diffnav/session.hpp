#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "diffnav/autopilot.hpp"
#include "diffnav/planner.hpp"
#include "diffnav/protocol.hpp"
#include "diffnav/simworld.hpp"

namespace diffnav::teleop {

struct SessionConfig {
  double tick_ms = 100.0;
  double watchdog_ms = 500.0;  // manual drive expires after this much silence
  double map_resolution = kDefaultResolution;
  sim::AutopilotConfig autopilot;
};

/// Snapshot of the operator-visible session state.
struct SessionState {
  Mode mode = Mode::idle;
  std::optional<odom::WaypointPlan> active_plan;
  behaviors::TrackerConfig tracker_cfg;
  behaviors::AvoidConfig avoid_cfg;
  bool connected = false;
};

/// Control-program server side without any transport. One instance is the
/// sole owner of the world; callers feed it decoded messages and tick it.
class TeleopSession {
 public:
  explicit TeleopSession(sim::WorldState world, SessionConfig cfg = {})
      : cfg_(std::move(cfg)), world_(std::move(world)), pilot_(cfg_.autopilot) {
    if (!(cfg_.tick_ms > 0.0)) throw std::invalid_argument("SessionConfig: tick_ms must be > 0");
    pilot_.reset(world_);
  }

  const sim::WorldState& world() const { return world_; }
  sim::WorldState& world() { return world_; }
  const sim::Autopilot& autopilot() const { return pilot_; }
  const SessionConfig& config() const { return cfg_; }
  bool connected() const { return connected_; }
  Mode mode() const { return pilot_.mode(); }

  SessionState state() const {
    return {pilot_.mode(), pilot_.plan(), pilot_.config().tracker, pilot_.config().avoid,
            connected_};
  }

  void connect() { connected_ = true; }

  /// Link loss: motion stops and the autonomous behaviour is dropped.
  void disconnect() {
    connected_ = false;
    manual_ = {};
    last_drive_ms_.reset();
    pilot_.set_mode(Mode::idle, world_);
  }

  /// Decodes and handles one wire frame. Bad frames produce an error reply.
  std::vector<ServerMessage> handle_frame(std::string_view text) {
    ControlMessage msg;
    try {
      msg = decode_control(text);
    } catch (const DecodeError& e) {
      return {ServerMessage::error_of(e.what())};
    }
    return handle_message(msg);
  }

  std::vector<ServerMessage> handle_message(const ControlMessage& msg) {
    if (!connected_) return {ServerMessage::error_of("session not connected")};
    if (auto defect = control_defect(msg); !defect.empty()) {
      return {ServerMessage::error_of(defect)};
    }

    switch (msg.type) {
      case ControlType::set_mode: {
        stop_manual();
        pilot_.clear_plan();
        std::vector<ServerMessage> out{ServerMessage::ack_of(msg)};
        for (auto e : pilot_.set_mode(*msg.mode, world_)) out.push_back(ServerMessage::event_of(e));
        return out;
      }
      case ControlType::drive: {
        if (pilot_.mode() != Mode::manual) {
          return {ServerMessage::error_of("manual drive requires manual mode")};
        }
        manual_ = drive_command(*msg.dir);
        last_drive_ms_ = world_.sim_time_ms;
        return {ServerMessage::ack_of(msg)};
      }
      case ControlType::camera:
        world_.camera_pan = deg_to_rad(*msg.pan_deg);
        return {ServerMessage::ack_of(msg)};
      case ControlType::set_target:
        pilot_.set_target_label(*msg.label);
        return {ServerMessage::ack_of(msg)};
      case ControlType::load_map:
        return load_map(msg);
      case ControlType::detect_once:
        return {ServerMessage::detections_of(sim::camera_detect(world_))};
    }
    return {ServerMessage::error_of("unhandled message")};
  }

  /// One simulation tick: exactly one telemetry message, followed by any
  /// behaviour events. Nothing is emitted while disconnected.
  std::vector<ServerMessage> tick() {
    if (!connected_) return {};
    MotionCommand manual;
    if (pilot_.mode() == Mode::manual && last_drive_ms_ &&
        static_cast<double>(world_.sim_time_ms - *last_drive_ms_) < cfg_.watchdog_ms) {
      manual = manual_;
    } else {
      stop_manual();
    }
    sim::TickResult t = pilot_.tick(world_, cfg_.tick_ms, manual);
    std::vector<ServerMessage> out{ServerMessage::telemetry(std::move(t.frame))};
    for (auto e : t.events) out.push_back(ServerMessage::event_of(e));
    return out;
  }

 private:
  MotionCommand drive_command(DriveDir dir) const {
    const auto& r = world_.robot;
    switch (dir) {
      case DriveDir::forward: return {r.max_linear_speed, 0.0};
      case DriveDir::backward: return {-r.max_linear_speed, 0.0};
      case DriveDir::left: return {0.0, r.max_angular_speed};
      case DriveDir::right: return {0.0, -r.max_angular_speed};
      case DriveDir::stop: return {};
    }
    return {};
  }

  void stop_manual() {
    manual_ = {};
    last_drive_ms_.reset();
  }

  std::vector<ServerMessage> load_map(const ControlMessage& msg) {
    GridMap map;
    try {
      map = planner::parse_map(*msg.map_text, cfg_.map_resolution);
    } catch (const MapFormatError& e) {
      return {ServerMessage::error_of(std::string("load_map: ") + e.what())};
    }
    stop_manual();
    const Mode mode = pilot_.mode();
    world_.map = std::move(map);
    const Vec2 start = cell_to_world(world_.map, world_.map.start);
    world_.robot_pose = {start.x, start.y, world_.robot_pose.theta};
    pilot_.reset(world_);

    std::vector<ServerMessage> out{ServerMessage::ack_of(msg)};
    for (auto e : pilot_.set_mode(mode, world_)) out.push_back(ServerMessage::event_of(e));
    return out;
  }

  SessionConfig cfg_;
  sim::WorldState world_;
  sim::Autopilot pilot_;
  bool connected_ = false;
  MotionCommand manual_;
  std::optional<std::int64_t> last_drive_ms_;
};

}  // namespace diffnav::teleop
