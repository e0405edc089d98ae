#pragma once

#include "diffnav/autopilot.hpp"
#include "diffnav/behaviors.hpp"
#include "diffnav/config.hpp"
#include "diffnav/core.hpp"
#include "diffnav/odometry.hpp"
#include "diffnav/planner.hpp"
#include "diffnav/protocol.hpp"
#include "diffnav/session.hpp"
#include "diffnav/simworld.hpp"
#include "diffnav/telemetry.hpp"
