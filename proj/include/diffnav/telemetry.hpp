#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace diffnav::sim {

/// One periodic record of the robot's state.
struct TelemetryFrame {
  std::int64_t timestamp_ms = 0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v_left = 0.0;   // mm/s
  double v_right = 0.0;  // mm/s
  std::string mode;
  std::vector<double> sonar;
  std::string zone_or_action;

  friend bool operator==(const TelemetryFrame&, const TelemetryFrame&) = default;
};

inline void to_json(nlohmann::json& j, const TelemetryFrame& f) {
  j = nlohmann::json{{"timestamp_ms", f.timestamp_ms}, {"x", f.x},
                     {"y", f.y},                       {"theta", f.theta},
                     {"v_left", f.v_left},             {"v_right", f.v_right},
                     {"mode", f.mode},                 {"sonar", f.sonar},
                     {"zone_or_action", f.zone_or_action}};
}

inline void from_json(const nlohmann::json& j, TelemetryFrame& f) {
  j.at("timestamp_ms").get_to(f.timestamp_ms);
  j.at("x").get_to(f.x);
  j.at("y").get_to(f.y);
  j.at("theta").get_to(f.theta);
  j.at("v_left").get_to(f.v_left);
  j.at("v_right").get_to(f.v_right);
  j.at("mode").get_to(f.mode);
  j.at("sonar").get_to(f.sonar);
  j.at("zone_or_action").get_to(f.zone_or_action);
}

using TelemetrySink = std::function<void(const TelemetryFrame&)>;

/// Writes one JSON object per line.
inline TelemetrySink jsonl_sink(std::ostream& out) {
  return [&out](const TelemetryFrame& f) { out << nlohmann::json(f).dump() << '\n'; };
}

/// Single-producer single-consumer frame queue. The stepping thread pushes,
/// a reader drains; close() wakes a blocked reader once the queue is empty.
class FrameChannel {
 public:
  void push(TelemetryFrame frame) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(frame));
    }
    ready_.notify_one();
  }

  /// Blocks until a frame is available or the channel is closed and drained.
  std::optional<TelemetryFrame> pop() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    TelemetryFrame f = std::move(queue_.front());
    queue_.pop_front();
    return f;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    ready_.notify_all();
  }

  TelemetrySink sink() {
    return [this](const TelemetryFrame& f) { push(f); };
  }

 private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<TelemetryFrame> queue_;
  bool closed_ = false;
};

}  // namespace diffnav::sim
