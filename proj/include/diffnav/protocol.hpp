#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "diffnav/autopilot.hpp"
#include "diffnav/behaviors.hpp"
#include "diffnav/telemetry.hpp"
#include "json.hpp"

// Wire protocol: one JSON object per line, each with a mandatory "type".
// Fields a message type does not use are ignored on decode.

namespace diffnav::teleop {

using sim::EventKind;
using sim::Mode;
using sim::TelemetryFrame;

/// Frame that could not be decoded. Carries the offending text verbatim.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

enum class ControlType { set_mode, drive, camera, set_target, load_map, detect_once };
enum class DriveDir { forward, backward, left, right, stop };

inline const char* to_string(ControlType t) {
  switch (t) {
    case ControlType::set_mode: return "set_mode";
    case ControlType::drive: return "drive";
    case ControlType::camera: return "camera";
    case ControlType::set_target: return "set_target";
    case ControlType::load_map: return "load_map";
    case ControlType::detect_once: return "detect_once";
  }
  return "?";
}

inline const char* to_string(DriveDir d) {
  switch (d) {
    case DriveDir::forward: return "forward";
    case DriveDir::backward: return "backward";
    case DriveDir::left: return "left";
    case DriveDir::right: return "right";
    case DriveDir::stop: return "stop";
  }
  return "?";
}

inline std::optional<ControlType> parse_control_type(std::string_view s) {
  for (auto t : {ControlType::set_mode, ControlType::drive, ControlType::camera,
                 ControlType::set_target, ControlType::load_map, ControlType::detect_once}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

inline std::optional<DriveDir> parse_drive_dir(std::string_view s) {
  for (auto d : {DriveDir::forward, DriveDir::backward, DriveDir::left, DriveDir::right,
                 DriveDir::stop}) {
    if (s == to_string(d)) return d;
  }
  return std::nullopt;
}

inline constexpr double kMaxPanDeg = 90.0;

/// Operator -> robot. Only the field its type needs is set.
struct ControlMessage {
  ControlType type = ControlType::detect_once;
  std::optional<Mode> mode;            // set_mode
  std::optional<DriveDir> dir;         // drive
  std::optional<double> pan_deg;       // camera, [-90, 90]
  std::optional<std::string> label;    // set_target
  std::optional<std::string> map_text; // load_map

  friend bool operator==(const ControlMessage&, const ControlMessage&) = default;

  static ControlMessage set_mode(Mode m) {
    ControlMessage c;
    c.type = ControlType::set_mode;
    c.mode = m;
    return c;
  }
  static ControlMessage drive(DriveDir d) {
    ControlMessage c;
    c.type = ControlType::drive;
    c.dir = d;
    return c;
  }
  static ControlMessage camera(double pan) {
    ControlMessage c;
    c.type = ControlType::camera;
    c.pan_deg = pan;
    return c;
  }
  static ControlMessage set_target(std::string l) {
    ControlMessage c;
    c.type = ControlType::set_target;
    c.label = std::move(l);
    return c;
  }
  static ControlMessage load_map(std::string text) {
    ControlMessage c;
    c.type = ControlType::load_map;
    c.map_text = std::move(text);
    return c;
  }
  static ControlMessage detect_once() {
    ControlMessage c;
    c.type = ControlType::detect_once;
    return c;
  }
};

/// Empty string when `m` carries exactly the fields its type requires.
inline std::string control_defect(const ControlMessage& m) {
  const bool want_mode = m.type == ControlType::set_mode;
  const bool want_dir = m.type == ControlType::drive;
  const bool want_pan = m.type == ControlType::camera;
  const bool want_label = m.type == ControlType::set_target;
  const bool want_map = m.type == ControlType::load_map;
  const std::string t = to_string(m.type);
  if (want_mode != m.mode.has_value()) return t + ": field 'mode' " + (want_mode ? "missing" : "not allowed");
  if (want_dir != m.dir.has_value()) return t + ": field 'dir' " + (want_dir ? "missing" : "not allowed");
  if (want_pan != m.pan_deg.has_value()) return t + ": field 'pan_deg' " + (want_pan ? "missing" : "not allowed");
  if (want_label != m.label.has_value()) return t + ": field 'label' " + (want_label ? "missing" : "not allowed");
  if (want_map != m.map_text.has_value()) return t + ": field 'map_text' " + (want_map ? "missing" : "not allowed");
  if (m.pan_deg && !(*m.pan_deg >= -kMaxPanDeg && *m.pan_deg <= kMaxPanDeg)) {
    return "camera: pan_deg must be within [-90, 90]";
  }
  return {};
}

enum class ServerType { telemetry, detections, event, error, ack };

inline const char* to_string(ServerType t) {
  switch (t) {
    case ServerType::telemetry: return "telemetry";
    case ServerType::detections: return "detections";
    case ServerType::event: return "event";
    case ServerType::error: return "error";
    case ServerType::ack: return "ack";
  }
  return "?";
}

inline std::optional<ServerType> parse_server_type(std::string_view s) {
  for (auto t : {ServerType::telemetry, ServerType::detections, ServerType::event,
                 ServerType::error, ServerType::ack}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

/// Robot -> operator.
struct ServerMessage {
  ServerType type = ServerType::ack;
  std::optional<TelemetryFrame> frame;                        // telemetry
  std::optional<std::vector<behaviors::Detection>> detections; // detections
  std::optional<EventKind> event;                             // event
  std::optional<std::string> message;                         // error
  std::optional<ControlMessage> echo;                         // ack

  friend bool operator==(const ServerMessage&, const ServerMessage&) = default;

  static ServerMessage telemetry(TelemetryFrame f) {
    ServerMessage m;
    m.type = ServerType::telemetry;
    m.frame = std::move(f);
    return m;
  }
  static ServerMessage detections_of(std::vector<behaviors::Detection> d) {
    ServerMessage m;
    m.type = ServerType::detections;
    m.detections = std::move(d);
    return m;
  }
  static ServerMessage event_of(EventKind e) {
    ServerMessage m;
    m.type = ServerType::event;
    m.event = e;
    return m;
  }
  static ServerMessage error_of(std::string text) {
    ServerMessage m;
    m.type = ServerType::error;
    m.message = std::move(text);
    return m;
  }
  static ServerMessage ack_of(ControlMessage c) {
    ServerMessage m;
    m.type = ServerType::ack;
    m.echo = std::move(c);
    return m;
  }
};

namespace detail {

using nlohmann::json;

inline json control_to_json(const ControlMessage& m) {
  if (auto defect = control_defect(m); !defect.empty()) throw std::invalid_argument(defect);
  json j{{"type", to_string(m.type)}};
  if (m.mode) j["mode"] = sim::to_string(*m.mode);
  if (m.dir) j["dir"] = to_string(*m.dir);
  if (m.pan_deg) j["pan_deg"] = *m.pan_deg;
  if (m.label) j["label"] = *m.label;
  if (m.map_text) j["map_text"] = *m.map_text;
  return j;
}

inline const json& require(const json& j, const char* key, const char* type) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw std::invalid_argument(std::string(type) + ": missing field '" + key + "'");
  }
  return *it;
}

inline std::string require_string(const json& j, const char* key, const char* type) {
  const json& v = require(j, key, type);
  if (!v.is_string()) {
    throw std::invalid_argument(std::string(type) + ": field '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

inline ControlMessage control_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("frame is not a JSON object");
  const std::string type_name = require_string(j, "type", "message");
  const auto type = parse_control_type(type_name);
  if (!type) throw std::invalid_argument("unknown message type '" + type_name + "'");

  ControlMessage m;
  m.type = *type;
  const char* t = to_string(*type);
  switch (*type) {
    case ControlType::set_mode: {
      const std::string s = require_string(j, "mode", t);
      m.mode = sim::parse_mode(s);
      if (!m.mode) throw std::invalid_argument("set_mode: unknown mode '" + s + "'");
      break;
    }
    case ControlType::drive: {
      const std::string s = require_string(j, "dir", t);
      m.dir = parse_drive_dir(s);
      if (!m.dir) throw std::invalid_argument("drive: unknown dir '" + s + "'");
      break;
    }
    case ControlType::camera: {
      const json& v = require(j, "pan_deg", t);
      if (!v.is_number()) throw std::invalid_argument("camera: field 'pan_deg' must be a number");
      m.pan_deg = v.get<double>();
      break;
    }
    case ControlType::set_target:
      m.label = require_string(j, "label", t);
      break;
    case ControlType::load_map:
      m.map_text = require_string(j, "map_text", t);
      break;
    case ControlType::detect_once:
      break;
  }
  if (auto defect = control_defect(m); !defect.empty()) throw std::invalid_argument(defect);
  return m;
}

inline json detection_to_json(const behaviors::Detection& d) {
  return json{{"label", d.label},
              {"confidence", d.confidence},
              {"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}}};
}

inline behaviors::Detection detection_from_json(const json& j) {
  behaviors::Detection d;
  j.at("label").get_to(d.label);
  j.at("confidence").get_to(d.confidence);
  const json& b = j.at("bbox");
  if (!b.is_array() || b.size() != 4) throw std::invalid_argument("bbox must have 4 numbers");
  d.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
  return d;
}

}  // namespace detail

inline std::string encode(const ControlMessage& m) { return detail::control_to_json(m).dump(); }

inline std::string encode(const ServerMessage& m) {
  using detail::json;
  json j{{"type", to_string(m.type)}};
  switch (m.type) {
    case ServerType::telemetry:
      j["frame"] = m.frame.value();
      break;
    case ServerType::detections: {
      json arr = json::array();
      for (const auto& d : m.detections.value()) arr.push_back(detail::detection_to_json(d));
      j["detections"] = std::move(arr);
      break;
    }
    case ServerType::event:
      j["event"] = sim::to_string(m.event.value());
      break;
    case ServerType::error:
      j["message"] = m.message.value();
      break;
    case ServerType::ack:
      j["echo"] = detail::control_to_json(m.echo.value());
      break;
  }
  return j.dump();
}

inline ControlMessage decode_control(std::string_view text) {
  const std::string raw(text);
  try {
    return detail::control_from_json(nlohmann::json::parse(raw));
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("malformed frame: ") + e.what(), raw);
  } catch (const std::invalid_argument& e) {
    throw DecodeError(e.what(), raw);
  }
}

inline ServerMessage decode_server(std::string_view text) {
  const std::string raw(text);
  try {
    const auto j = nlohmann::json::parse(raw);
    if (!j.is_object()) throw std::invalid_argument("frame is not a JSON object");
    const std::string type_name = detail::require_string(j, "type", "message");
    const auto type = parse_server_type(type_name);
    if (!type) throw std::invalid_argument("unknown message type '" + type_name + "'");

    ServerMessage m;
    m.type = *type;
    switch (*type) {
      case ServerType::telemetry:
        m.frame = detail::require(j, "frame", "telemetry").get<TelemetryFrame>();
        break;
      case ServerType::detections: {
        std::vector<behaviors::Detection> ds;
        for (const auto& d : detail::require(j, "detections", "detections")) {
          ds.push_back(detail::detection_from_json(d));
        }
        m.detections = std::move(ds);
        break;
      }
      case ServerType::event: {
        const std::string s = detail::require_string(j, "event", "event");
        m.event = sim::parse_event(s);
        if (!m.event) throw std::invalid_argument("event: unknown kind '" + s + "'");
        break;
      }
      case ServerType::error:
        m.message = detail::require_string(j, "message", "error");
        break;
      case ServerType::ack:
        m.echo = detail::control_from_json(detail::require(j, "echo", "ack"));
        break;
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("malformed frame: ") + e.what(), raw);
  } catch (const std::invalid_argument& e) {
    throw DecodeError(e.what(), raw);
  }
}

}  // namespace diffnav::teleop
