#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "diffnav/odometry.hpp"
#include "oracles.hpp"

using namespace diffnav;
using odom::integrate;
using odom::OdometryState;

namespace {

OdometryState at(double x, double y, double theta) { return {{x, y, theta}, 0.0}; }

}  // namespace

TEST(Integrate, StraightDrive) {
  const auto s = integrate(at(0, 0, 0), {100, 100}, 200);
  EXPECT_EQ(s.pose, (Pose{100, 0, 0}));
  EXPECT_EQ(s.accumulated_distance, 100.0);
}

TEST(Integrate, PureRotation) {
  const auto s = integrate(at(0, 0, 0), {-50, 50}, 200);
  EXPECT_EQ(s.pose, (Pose{0, 0, 0.5}));
  EXPECT_EQ(s.accumulated_distance, 0.0);
}

TEST(Integrate, ArcMatchesHighPrecisionValue) {
  const auto s = integrate(at(0, 0, 0), {90, 110}, 200);
  // 100 cos(0.05), 100 sin(0.05), frozen from a 50-digit evaluation
  EXPECT_NEAR(s.pose.x, 99.87502603949662, 1e-9);
  EXPECT_NEAR(s.pose.y, 4.997916927067833, 1e-9);
  EXPECT_NEAR(s.pose.theta, 0.1, 1e-15);
}

TEST(Integrate, RejectsBadWheelbase) {
  EXPECT_THROW(integrate(at(0, 0, 0), {1, 1}, 0.0), std::invalid_argument);
  EXPECT_THROW(integrate(at(0, 0, 0), {1, 1}, -5.0), std::invalid_argument);
}

TEST(Integrate, RandomTriplesAgreeWithOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-5000, 5000), ang(-kPi, kPi), wheel(-300, 300),
      base(100, 600);
  for (int i = 0; i < 500; ++i) {
    const double x = pos(rng), y = pos(rng), th = ang(rng), dl = wheel(rng), dr = wheel(rng),
                 b = base(rng);
    const auto s = integrate(at(x, y, th), {dl, dr}, b);
    const auto ref = oracle::integrate(x, y, th, dl, dr, b);
    ASSERT_NEAR(s.pose.x, static_cast<double>(ref.x), 1e-6);
    ASSERT_NEAR(s.pose.y, static_cast<double>(ref.y), 1e-6);
    const double dth = std::abs(normalize_angle(s.pose.theta - static_cast<double>(ref.theta)));
    ASSERT_LT(dth, 1e-9);
  }
}

TEST(Integrate, ZeroDeltaIsIdentity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(-5000, 5000), ang(-kPi, kPi);
  for (int i = 0; i < 200; ++i) {
    const auto start = at(pos(rng), pos(rng), ang(rng));
    EXPECT_EQ(integrate(start, {0, 0}, 300).pose, start.pose);
  }
}

TEST(Integrate, RotationMirrorsUnderSwappedWheels) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> wheel(-200, 200);
  for (int i = 0; i < 200; ++i) {
    const double a = wheel(rng), b = wheel(rng);
    const auto p = integrate(at(0, 0, 0), {a, b}, 250).pose;
    const auto q = integrate(at(0, 0, 0), {b, a}, 250).pose;
    EXPECT_DOUBLE_EQ(p.x, q.x);
    EXPECT_DOUBLE_EQ(p.y, -q.y);
    EXPECT_DOUBLE_EQ(p.theta, -q.theta);
  }
}

TEST(HeadingTo, Examples) {
  EXPECT_EQ(odom::heading_to({0, 0, 0}, {100, 0}), 0.0);
  EXPECT_NEAR(odom::heading_to({0, 0, 0}, {0, 100}), kPi / 2, 1e-15);
  // atan2(0, -100) - pi/2
  EXPECT_NEAR(odom::heading_to({0, 0, kPi / 2}, {-100, 0}), 1.5707963267948966, 1e-12);
  EXPECT_THROW(odom::heading_to({5, 5, 0}, {5, 5}), DegenerateTargetError);
}

TEST(WaypointStep, DrivesTowardTargetAhead) {
  odom::WaypointPlan plan{{{2200, 0}}};
  const auto s = odom::waypoint_step(at(0, 0, 0), plan, RobotConfig{});
  EXPECT_GT(s.command.linear, 0.0);
  EXPECT_EQ(s.command.angular, 0.0);
  EXPECT_EQ(s.phase, odom::StepPhase::drive);
  EXPECT_FALSE(s.reached_goal);
}

TEST(WaypointStep, ConsumesWaypointWithinTolerance) {
  odom::WaypointPlan plan{{{2200, 0}, {2200, 1000}}};
  const auto s = odom::waypoint_step(at(2195, 0, 0), plan, RobotConfig{});
  EXPECT_TRUE(s.advanced);
  EXPECT_EQ(s.plan.current_index, 1u);
  EXPECT_TRUE(s.command.is_stop());
  EXPECT_FALSE(s.reached_goal);

  const auto last = odom::waypoint_step(at(2200, 990, 0), s.plan, RobotConfig{});
  EXPECT_TRUE(last.reached_goal);
  EXPECT_TRUE(last.plan.finished());
}

TEST(WaypointStep, RotatesLeftForTargetOnTheLeft) {
  odom::WaypointPlan plan{{{0, 1000}}};
  const auto s = odom::waypoint_step(at(0, 0, 0), plan, RobotConfig{});
  const double ref = odom::heading_to({0, 0, 0}, {0, 1000});
  EXPECT_EQ(s.command.linear, 0.0);
  EXPECT_GT(s.command.angular, 0.0);
  EXPECT_EQ(std::signbit(s.command.angular), std::signbit(ref));
}

TEST(WaypointStep, NeverMixesRotationAndTranslation) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> pos(-3000, 3000), ang(-kPi, kPi);
  for (int i = 0; i < 1000; ++i) {
    odom::WaypointPlan plan{{{pos(rng), pos(rng)}}};
    const auto s = odom::waypoint_step(at(pos(rng), pos(rng), ang(rng)), plan, RobotConfig{});
    EXPECT_TRUE(s.command.linear == 0.0 || s.command.angular == 0.0);
  }
}

TEST(WaypointStep, InvalidPlans) {
  EXPECT_THROW(odom::waypoint_step(at(0, 0, 0), {}, RobotConfig{}), InvalidStateError);
  odom::WaypointPlan done{{{1, 1}}, 1};
  EXPECT_THROW(odom::waypoint_step(at(0, 0, 0), done, RobotConfig{}), InvalidStateError);
}
