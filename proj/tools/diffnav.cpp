// Command-line front end: plan a map, run a simulated episode, or serve a
// teleop session.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "diffnav/diffnav.hpp"
#include "diffnav/server.hpp"

namespace {

using namespace diffnav;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

sim::Target parse_target(const std::string& spec) {
  const auto comma = spec.find(',');
  if (comma == std::string::npos) throw CLI::ValidationError("--target", "expected label,x,y[,radius]");
  sim::Target t;
  t.label = spec.substr(0, comma);
  const auto nums = parse_numbers(spec.substr(comma + 1));
  if (nums.size() < 2 || nums.size() > 3) {
    throw CLI::ValidationError("--target", "expected label,x,y[,radius]");
  }
  t.x = nums[0];
  t.y = nums[1];
  t.radius = nums.size() == 3 ? nums[2] : 200.0;
  return t;
}

Vec2 parse_point(const std::string& spec) {
  const auto nums = parse_numbers(spec);
  if (nums.size() != 2) throw CLI::ValidationError("--waypoint", "expected x,y");
  return {nums[0], nums[1]};
}

struct CommonOptions {
  std::string map_path;
  std::string config_path;
  std::uint64_t seed = 0;
  double tick_ms = 100.0;
  std::string sensor;
  std::vector<std::string> targets;
};

config::Settings load(const CommonOptions& opts) {
  config::Settings s = opts.config_path.empty() ? config::parse_settings(nlohmann::json::object())
                                                : config::load_settings(opts.config_path);
  if (opts.sensor == "rotating") s.autopilot.avoid_sensor = sim::AvoidSensor::rotating;
  if (opts.sensor == "ring") s.autopilot.avoid_sensor = sim::AvoidSensor::ring;
  for (const auto& t : opts.targets) s.targets.push_back(parse_target(t));
  return s;
}

sim::WorldState build_world(const CommonOptions& opts, const config::Settings& s) {
  GridMap map = planner::parse_map(config::read_file(opts.map_path), s.map_resolution);
  sim::WorldState world = sim::make_world(std::move(map), s.robot, opts.seed, s.initial_heading);
  world.targets = s.targets;
  world.encoder_noise_sigma = s.encoder_noise_sigma;
  return world;
}

int cmd_plan(const std::string& map_path, double resolution) {
  const auto ascii = planner::parse_ascii(config::read_file(map_path));
  const GridMap grid = planner::to_grid(ascii, resolution);
  const auto path = planner::astar(grid);
  std::cout << planner::render_overlay(ascii, path);
  const auto turns = planner::simplify(path);
  std::cerr << "steps: " << path.steps() << ", turn points: " << turns.size() << "\n";
  for (const auto& p : planner::to_waypoints(path, grid).nodes) {
    std::cerr << "  (" << p.x << ", " << p.y << ")\n";
  }
  return 0;
}

int cmd_run(const CommonOptions& opts, const std::string& mode_name, std::size_t max_ticks,
            const std::string& log_path, const std::vector<std::string>& waypoints,
            bool relative) {
  const auto mode = sim::parse_mode(mode_name);
  if (!mode) throw CLI::ValidationError("--mode", "unknown mode '" + mode_name + "'");
  const config::Settings settings = load(opts);
  sim::WorldState world = build_world(opts, settings);

  sim::EpisodeConfig ep;
  ep.mode = *mode;
  ep.tick_ms = opts.tick_ms;
  ep.max_ticks = max_ticks;
  ep.autopilot = settings.autopilot;
  if (!waypoints.empty()) {
    std::vector<Vec2> pts;
    for (const auto& w : waypoints) {
      Vec2 p = parse_point(w);
      if (relative) p = {p.x + world.robot_pose.x, p.y + world.robot_pose.y};
      pts.push_back(p);
    }
    ep.waypoints = std::move(pts);
  }

  std::ofstream log;
  sim::TelemetrySink sink;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write '" + log_path + "'");
    sink = sim::jsonl_sink(log);
  }
  const auto report = sim::run_episode(world, ep, sink);

  nlohmann::json summary{
      {"ticks_used", report.ticks_used},
      {"collisions", report.collisions},
      {"goal_reached", report.goal_reached},
      {"halted_at_target", report.halted_at_target},
      {"corner_traps", report.corner_traps},
      {"final_pose",
       {{"x", report.final_pose.x}, {"y", report.final_pose.y}, {"theta", report.final_pose.theta}}},
      {"failed", report.failed}};
  if (report.failed) summary["error"] = report.error;
  std::cout << summary.dump() << "\n";
  return report.failed ? 2 : 0;
}

int cmd_serve(const CommonOptions& opts, std::uint16_t port, const std::string& bind) {
  const config::Settings settings = load(opts);
  teleop::SessionConfig cfg;
  cfg.tick_ms = opts.tick_ms;
  cfg.map_resolution = settings.map_resolution;
  cfg.autopilot = settings.autopilot;
  teleop::TeleopServer server(teleop::TeleopSession(build_world(opts, settings), cfg),
                              teleop::ServerConfig{bind, port});
  server.start();
  std::cerr << "diffnav: serving on " << bind << ":" << server.port() << " (tick " << opts.tick_ms
            << " ms)\n";
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential-drive navigation stack: planning, simulation and teleop"};
  app.require_subcommand(1);

  CommonOptions opts;
  double plan_resolution = kDefaultResolution;
  auto* plan = app.add_subcommand("plan", "Print the A* path over a map as a '*' overlay");
  plan->add_option("--map", opts.map_path, "Map text file")->required()->check(CLI::ExistingFile);
  plan->add_option("--resolution", plan_resolution, "Cell size in mm")->default_val(100.0);

  std::string mode = "odometry";
  std::size_t max_ticks = 1000;
  std::string log_path;
  std::vector<std::string> waypoints;
  bool relative = false;
  auto* run = app.add_subcommand("run", "Run one simulated episode");
  run->add_option("--map", opts.map_path, "Map text file")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", mode, "idle|manual|odometry|tracking|avoidance")->default_val("odometry");
  run->add_option("--max-ticks", max_ticks, "Tick limit")->default_val(1000);
  run->add_option("--log", log_path, "Telemetry log (JSON lines)");
  run->add_option("--seed", opts.seed, "Random seed")->default_val(0);
  run->add_option("--tick-ms", opts.tick_ms, "Tick period in ms")->default_val(100.0);
  run->add_option("--config", opts.config_path, "JSON overrides")->check(CLI::ExistingFile);
  run->add_option("--sensor", opts.sensor, "Avoidance sensor: ring|rotating")
      ->check(CLI::IsMember({"ring", "rotating"}));
  run->add_option("--target", opts.targets, "Detectable target: label,x,y[,radius] (mm)");
  run->add_option("--waypoint", waypoints, "Odometry waypoint x,y (mm); repeatable");
  run->add_flag("--relative", relative, "Waypoints are offsets from the start pose");

  std::uint16_t port = config::default_port();
  std::string bind = "0.0.0.0";
  auto* serve = app.add_subcommand("serve", "Serve a teleop session over TCP/WebSocket");
  serve->add_option("--map", opts.map_path, "Map text file")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Listen port (default from DIFFNAV_PORT)");
  serve->add_option("--bind", bind, "Bind address")->default_val("0.0.0.0");
  serve->add_option("--tick-ms", opts.tick_ms, "Tick period in ms")->default_val(100.0);
  serve->add_option("--seed", opts.seed, "Random seed")->default_val(0);
  serve->add_option("--config", opts.config_path, "JSON overrides")->check(CLI::ExistingFile);
  serve->add_option("--sensor", opts.sensor, "Avoidance sensor: ring|rotating")
      ->check(CLI::IsMember({"ring", "rotating"}));
  serve->add_option("--target", opts.targets, "Detectable target: label,x,y[,radius] (mm)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return cmd_plan(opts.map_path, plan_resolution);
    if (*run) return cmd_run(opts, mode, max_ticks, log_path, waypoints, relative);
    if (*serve) return cmd_serve(opts, port, bind);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "diffnav: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
