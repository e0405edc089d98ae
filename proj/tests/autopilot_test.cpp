#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "diffnav/autopilot.hpp"
#include "diffnav/config.hpp"
#include "diffnav/planner.hpp"

using namespace diffnav;
using namespace diffnav::sim;

namespace {

GridMap load_map(const std::string& name) {
  return planner::parse_map(config::read_file(std::string(DIFFNAV_MAPS_DIR) + "/" + name));
}

std::vector<TelemetryFrame> collect(WorldState& w, const EpisodeConfig& cfg, EpisodeReport* out) {
  std::vector<TelemetryFrame> frames;
  *out = run_episode(w, cfg, [&](const TelemetryFrame& f) { frames.push_back(f); });
  return frames;
}

}  // namespace

TEST(Episode, OdometryAlongCorridor) {
  WorldState w = make_world(planner::parse_map("M.........E"));
  EpisodeConfig cfg;
  cfg.mode = Mode::odometry;
  const auto r = run_episode(w, cfg);
  EXPECT_FALSE(r.failed) << r.error;
  EXPECT_TRUE(r.goal_reached);
  EXPECT_EQ(r.collisions, 0u);
  const Vec2 goal = cell_to_world(w.map, w.map.goals[0]);
  EXPECT_LT(distance(r.final_pose.position(), goal), cfg.autopilot.dist_tolerance);
}

TEST(Episode, OdometryThroughPlannedApartmentRoute) {
  WorldState w = make_world(load_map("apartment.txt"));
  EpisodeConfig cfg;
  cfg.mode = Mode::odometry;
  cfg.max_ticks = 5000;
  const auto r = run_episode(w, cfg);
  EXPECT_TRUE(r.goal_reached) << r.error;
  EXPECT_EQ(r.collisions, 0u);
  EXPECT_FALSE(r.arrivals.empty());
  for (const auto& a : r.arrivals) EXPECT_LT(a.true_error, cfg.autopilot.dist_tolerance);
}

TEST(Episode, GoalReachedReportedOnce) {
  WorldState w = make_world(planner::parse_map("M.........E"));
  EpisodeConfig cfg;
  cfg.mode = Mode::odometry;
  const auto r = run_episode(w, cfg);
  EXPECT_EQ(std::count(r.events.begin(), r.events.end(), EventKind::goal_reached), 1);
}

TEST(Episode, UnreachableGoalFails) {
  WorldState w = make_world(planner::parse_map("M#E"));
  EpisodeConfig cfg;
  cfg.mode = Mode::odometry;
  const auto r = run_episode(w, cfg);
  EXPECT_TRUE(r.failed);
  EXPECT_EQ(r.ticks_used, 0u);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0], EventKind::no_path);
}

TEST(Episode, AvoidanceInOpenRoomHasNoCollisions) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    WorldState w = make_world(load_map("open_room.txt"), {}, seed);
    EpisodeConfig cfg;
    cfg.mode = Mode::avoidance;
    cfg.max_ticks = 1000;
    const auto r = run_episode(w, cfg);
    EXPECT_EQ(r.ticks_used, 1000u);
    EXPECT_EQ(r.collisions, 0u);
  }
}

TEST(Episode, AvoidanceWithoutWallsNeverTurns) {
  GridMap m = planner::parse_map("M....E");
  WorldState w = make_world(m);
  EpisodeConfig cfg;
  cfg.mode = Mode::avoidance;
  cfg.max_ticks = 50;
  EpisodeReport r;
  const auto frames = collect(w, cfg, &r);
  ASSERT_EQ(frames.size(), 50u);
  for (const auto& f : frames) EXPECT_EQ(f.zone_or_action, "proceed");
  EXPECT_EQ(r.final_pose.theta, 0.0);
}

TEST(Episode, RotatingSensorScansAndTurns) {
  WorldState w = make_world(load_map("open_room.txt"), {}, 4);
  EpisodeConfig cfg;
  cfg.mode = Mode::avoidance;
  cfg.max_ticks = 1500;
  cfg.autopilot.avoid_sensor = AvoidSensor::rotating;
  EpisodeReport r;
  const auto frames = collect(w, cfg, &r);
  std::vector<std::string> seen;
  for (const auto& f : frames) {
    if (seen.empty() || seen.back() != f.zone_or_action) seen.push_back(f.zone_or_action);
  }
  const std::vector<std::string> cycle{"halt", "backup", "scan_right", "scan_left"};
  auto it = std::search(seen.begin(), seen.end(), cycle.begin(), cycle.end());
  ASSERT_NE(it, seen.end());
  const std::string turn = *(it + 4);
  EXPECT_TRUE(turn == "turn_left" || turn == "turn_right") << turn;
  EXPECT_EQ(r.collisions, 0u);
}

TEST(Episode, TrackingHaltsNearTarget) {
  GridMap m = load_map("open_room.txt");
  WorldState w = make_world(m);
  w.robot_pose = {1500, 2350, 0.0};
  w.targets.push_back({"person", 4500, 2000, 200});
  EpisodeConfig cfg;
  cfg.mode = Mode::tracking;
  cfg.max_ticks = 2000;
  EpisodeReport r;
  const auto frames = collect(w, cfg, &r);
  EXPECT_TRUE(r.halted_at_target);
  ASSERT_FALSE(frames.empty());
  EXPECT_EQ(frames.back().zone_or_action, "halted");
  const double range = std::hypot(4500 - r.final_pose.x, 2000 - r.final_pose.y);
  EXPECT_LT(range, cfg.autopilot.tracker.approach_distance);
  EXPECT_EQ(r.collisions, 0u);
}

TEST(Episode, TrackingSearchesForMissingTarget) {
  WorldState w = make_world(load_map("open_room.txt"));
  EpisodeConfig cfg;
  cfg.mode = Mode::tracking;
  cfg.max_ticks = 20;
  EpisodeReport r;
  const auto frames = collect(w, cfg, &r);
  for (const auto& f : frames) EXPECT_EQ(f.zone_or_action, "search");
  EXPECT_EQ(r.final_pose.position(), cell_to_world(w.map, w.map.start));
}

TEST(Episode, OneFramePerTickWithAdvancingTimestamps) {
  WorldState w = make_world(load_map("apartment.txt"), {}, 5);
  EpisodeConfig cfg;
  cfg.mode = Mode::avoidance;
  cfg.max_ticks = 300;
  EpisodeReport r;
  const auto frames = collect(w, cfg, &r);
  ASSERT_EQ(frames.size(), r.ticks_used);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(frames[i].timestamp_ms, static_cast<std::int64_t>(100 * (i + 1)));
    EXPECT_EQ(frames[i].sonar.size(), 8u);
  }
}

TEST(Episode, SameSeedSameFrames) {
  const auto run = [](std::uint64_t seed) {
    WorldState w = make_world(load_map("apartment.txt"), {}, seed);
    w.encoder_noise_sigma = 0.02;
    EpisodeConfig cfg;
    cfg.mode = Mode::avoidance;
    cfg.max_ticks = 2000;
    EpisodeReport r;
    return collect(w, cfg, &r);
  };
  EXPECT_EQ(run(42), run(42));
  EXPECT_NE(run(42), run(43));
}

TEST(Episode, EncoderNoiseMakesEstimateDrift) {
  WorldState w = make_world(load_map("open_room.txt"), {}, 3);
  w.encoder_noise_sigma = 0.05;
  EpisodeConfig cfg;
  cfg.mode = Mode::avoidance;
  cfg.max_ticks = 500;
  const auto r = run_episode(w, cfg);
  EXPECT_GT(distance(r.final_pose.position(), r.final_estimate.position()), 1.0);
}

TEST(Autopilot, ManualCommandOnlyInManualMode) {
  WorldState w = make_world(load_map("open_room.txt"));
  Autopilot pilot;
  pilot.reset(w);
  const MotionCommand fwd{200, 0};
  for (Mode m : {Mode::idle, Mode::tracking, Mode::avoidance}) {
    pilot.set_mode(m, w);
    const auto t = pilot.tick(w, 100, fwd);
    EXPECT_NE(t.command, fwd) << to_string(m);
  }
  pilot.set_mode(Mode::manual, w);
  EXPECT_EQ(pilot.tick(w, 100, fwd).command, fwd);
  EXPECT_TRUE(pilot.tick(w, 100, {}).command.is_stop());
}

TEST(Autopilot, OdometryEstimateTracksTruthWithoutNoise) {
  WorldState w = make_world(load_map("open_room.txt"));
  Autopilot pilot;
  pilot.reset(w);
  pilot.set_mode(Mode::odometry, w);
  for (int i = 0; i < 1500 && !pilot.finished(); ++i) {
    pilot.tick(w, 100);
    ASSERT_LT(distance(pilot.odometry().pose.position(), w.robot_pose.position()), 1e-6);
  }
  EXPECT_TRUE(pilot.finished());
}

TEST(FrameChannel, DeliversEveryFrameInOrderAcrossThreads) {
  FrameChannel ch;
  constexpr int kFrames = 5000;
  std::thread producer([&] {
    for (int i = 0; i < kFrames; ++i) {
      TelemetryFrame f;
      f.timestamp_ms = i;
      ch.push(f);
    }
    ch.close();
  });
  std::vector<std::int64_t> seen;
  while (auto f = ch.pop()) seen.push_back(f->timestamp_ms);
  producer.join();
  ASSERT_EQ(seen.size(), static_cast<std::size_t>(kFrames));
  for (int i = 0; i < kFrames; ++i) EXPECT_EQ(seen[i], i);
}

TEST(Telemetry, JsonLinesRoundTrip) {
  TelemetryFrame f{1200, 1.5, -2.25, 0.3, 100, 120, "avoidance", {3000, 412.5}, "turn_left"};
  std::ostringstream out;
  jsonl_sink(out)(f);
  const std::string line = out.str();
  ASSERT_EQ(line.back(), '\n');
  EXPECT_EQ(line.find('\n'), line.size() - 1);
  EXPECT_EQ(nlohmann::json::parse(line).get<TelemetryFrame>(), f);
}
