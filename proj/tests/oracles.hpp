#pragma once

// Independent reference implementations used by the tests.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "diffnav/core.hpp"
#include "diffnav/planner.hpp"

namespace oracle {

using diffnav::Cell;
using diffnav::GridMap;
using Big = boost::multiprecision::cpp_bin_float_50;

struct BigPose {
  Big x, y, theta;
};

inline Big big_pi() { return boost::multiprecision::atan(Big(1)) * 4; }

// Wrap into (-pi, pi] by repeated shifting.
inline Big wrap(Big a) {
  const Big pi = big_pi();
  while (a > pi) a -= 2 * pi;
  while (a <= -pi) a += 2 * pi;
  return a;
}

inline BigPose integrate(double x, double y, double theta, double dl, double dr, double wheelbase) {
  const Big bl(dl), br(dr), b(wheelbase);
  const Big dd = (bl + br) / 2;
  const Big dth = (br - bl) / b;
  const Big heading = Big(theta) + dth / 2;
  return {Big(x) + dd * boost::multiprecision::cos(heading),
          Big(y) + dd * boost::multiprecision::sin(heading), wrap(Big(theta) + dth)};
}

// Plain breadth-first search: number of steps to the nearest goal.
inline std::optional<int> bfs_steps(const GridMap& m) {
  std::vector<int> dist(static_cast<std::size_t>(m.width * m.height), -1);
  std::queue<Cell> q;
  dist[m.index(m.start)] = 0;
  q.push(m.start);
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    if (m.is_goal(c)) return dist[m.index(c)];
    const Cell nbrs[4] = {{c.row + 1, c.col}, {c.row - 1, c.col}, {c.row, c.col + 1},
                          {c.row, c.col - 1}};
    for (const Cell& n : nbrs) {
      if (!m.in_bounds(n) || m.is_occupied(n) || dist[m.index(n)] >= 0) continue;
      dist[m.index(n)] = dist[m.index(c)] + 1;
      q.push(n);
    }
  }
  return std::nullopt;
}

// Walks unit steps between consecutive turn points. Empty result if two points
// are not axis-aligned.
inline std::vector<Cell> expand(const std::vector<Cell>& turns) {
  std::vector<Cell> out;
  if (turns.empty()) return out;
  out.push_back(turns.front());
  for (std::size_t i = 1; i < turns.size(); ++i) {
    const Cell a = turns[i - 1];
    const Cell b = turns[i];
    if (a.row != b.row && a.col != b.col) return {};
    Cell c = a;
    while (c != b) {
      c.row += (b.row > c.row) - (b.row < c.row);
      c.col += (b.col > c.col) - (b.col < c.col);
      out.push_back(c);
    }
  }
  return out;
}

// Random solvable map: `wall_fraction` of the cells are walls, one start, one goal.
inline GridMap random_map(std::mt19937_64& rng, int width, int height, double wall_fraction) {
  std::uniform_int_distribution<int> row(0, height - 1);
  std::uniform_int_distribution<int> col(0, width - 1);
  std::bernoulli_distribution wall(wall_fraction);
  while (true) {
    GridMap m;
    m.width = width;
    m.height = height;
    m.occupied.resize(static_cast<std::size_t>(width * height));
    for (std::size_t i = 0; i < m.occupied.size(); ++i) m.occupied[i] = wall(rng);
    m.start = {row(rng), col(rng)};
    const Cell goal{row(rng), col(rng)};
    if (goal == m.start) continue;
    m.occupied[m.index(m.start)] = false;
    m.occupied[m.index(goal)] = false;
    m.goals = {goal};
    if (bfs_steps(m)) return m;
  }
}

// A path is valid when it starts at the start, ends on a goal, and moves one
// free cell at a time.
inline bool valid_path(const GridMap& m, const std::vector<Cell>& cells) {
  if (cells.empty() || cells.front() != m.start || !m.is_goal(cells.back())) return false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!m.in_bounds(cells[i]) || m.is_occupied(cells[i])) return false;
    if (i > 0) {
      const int d = std::abs(cells[i].row - cells[i - 1].row) +
                    std::abs(cells[i].col - cells[i - 1].col);
      if (d != 1) return false;
    }
  }
  return true;
}

}  // namespace oracle
