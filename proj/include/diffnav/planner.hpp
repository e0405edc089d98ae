#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "diffnav/core.hpp"

namespace diffnav::planner {

/// Text map: '#' wall, 'M' start, 'E' goal, '.' or ' ' free. Rows are padded
/// to equal length with '.'.
struct AsciiMap {
  std::vector<std::string> rows;

  int height() const { return static_cast<int>(rows.size()); }
  int width() const { return rows.empty() ? 0 : static_cast<int>(rows.front().size()); }

  friend bool operator==(const AsciiMap&, const AsciiMap&) = default;
};

/// Ordered cells from the start to a goal.
struct GridPath {
  std::vector<Cell> cells;

  bool empty() const { return cells.empty(); }
  std::size_t size() const { return cells.size(); }
  std::size_t steps() const { return cells.empty() ? 0 : cells.size() - 1; }

  friend bool operator==(const GridPath&, const GridPath&) = default;
};

namespace detail {

inline std::string cell_label(int row, int col) {
  return "row " + std::to_string(row + 1) + ", column " + std::to_string(col + 1);
}

}  // namespace detail

/// Splits and normalizes map text, validating the character set and the
/// start/goal counts.
inline AsciiMap parse_ascii(std::string_view text) {
  if (text.empty()) throw MapFormatError("map text is empty");

  AsciiMap map;
  std::string line;
  for (char ch : text) {
    if (ch == '\r') continue;
    if (ch == '\n') {
      map.rows.push_back(std::move(line));
      line.clear();
      continue;
    }
    line.push_back(ch);
  }
  // A trailing newline does not start a new row.
  if (!line.empty() || text.back() != '\n') map.rows.push_back(std::move(line));

  std::size_t width = 0;
  for (const auto& row : map.rows) width = std::max(width, row.size());
  if (width == 0) throw MapFormatError("map has no cells");
  for (auto& row : map.rows) row.resize(width, '.');

  int starts = 0;
  int goals = 0;
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      switch (map.rows[r][c]) {
        case 'M': ++starts; break;
        case 'E': ++goals; break;
        case '#':
        case '.':
        case ' ': break;
        default:
          throw MapFormatError("unknown map character '" + std::string(1, map.rows[r][c]) +
                               "' at " + detail::cell_label(r, c));
      }
    }
  }
  if (starts == 0) throw MapFormatError("map has no start cell 'M'");
  if (starts > 1) {
    throw MapFormatError("map has " + std::to_string(starts) + " start cells 'M'; expected one");
  }
  if (goals == 0) throw MapFormatError("map has no goal cell 'E'");
  return map;
}

inline GridMap to_grid(const AsciiMap& ascii, double resolution = kDefaultResolution) {
  GridMap grid;
  grid.width = ascii.width();
  grid.height = ascii.height();
  grid.resolution = resolution;
  grid.occupied.assign(static_cast<std::size_t>(grid.width) * grid.height, false);
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const char ch = ascii.rows[r][c];
      if (ch == '#') grid.occupied[grid.index({r, c})] = true;
      if (ch == 'M') grid.start = {r, c};
      if (ch == 'E') grid.goals.push_back({r, c});
    }
  }
  grid.validate();
  return grid;
}

inline GridMap parse_map(std::string_view text, double resolution = kDefaultResolution) {
  return to_grid(parse_ascii(text), resolution);
}

/// Rows joined by '\n', with a trailing newline.
inline std::string render(const AsciiMap& map) {
  std::string out;
  for (const auto& row : map.rows) {
    out += row;
    out += '\n';
  }
  return out;
}

inline AsciiMap to_ascii(const GridMap& grid) {
  AsciiMap ascii;
  ascii.rows.assign(grid.height, std::string(grid.width, '.'));
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      if (grid.occupied[grid.index({r, c})]) ascii.rows[r][c] = '#';
    }
  }
  for (const auto& g : grid.goals) ascii.rows[g.row][g.col] = 'E';
  ascii.rows[grid.start.row][grid.start.col] = 'M';
  return ascii;
}

/// Minimum Manhattan distance from `cell` to any goal.
inline int heuristic(const GridMap& map, Cell cell) {
  int best = std::numeric_limits<int>::max();
  for (const auto& g : map.goals) {
    best = std::min(best, std::abs(g.row - cell.row) + std::abs(g.col - cell.col));
  }
  return best;
}

// Expansion order: North, East, South, West.
inline constexpr std::array<Cell, 4> kNeighbourOffsets{{{-1, 0}, {0, 1}, {1, 0}, {0, -1}}};

/// Optional instrumentation for astar().
struct SearchTrace {
  std::vector<Cell> expanded;
};

/// Shortest 4-connected path from the start to the nearest goal, unit step
/// cost. Ties on f prefer the lower h, then the earliest-pushed entry.
inline GridPath astar(const GridMap& map, SearchTrace* trace = nullptr) {
  map.validate();

  const std::size_t n = static_cast<std::size_t>(map.width) * map.height;
  constexpr int kUnseen = std::numeric_limits<int>::max();
  std::vector<int> g_score(n, kUnseen);
  std::vector<bool> closed(n, false);
  std::vector<std::int64_t> parent(n, -1);

  // (f, h, sequence, cell index); std::greater makes it a min-heap.
  using Entry = std::tuple<int, int, std::uint64_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::uint64_t sequence = 0;

  const auto cell_of = [&](std::size_t idx) {
    return Cell{static_cast<int>(idx / map.width), static_cast<int>(idx % map.width)};
  };

  const std::size_t start = map.index(map.start);
  g_score[start] = 0;
  const int h0 = heuristic(map, map.start);
  open.emplace(h0, h0, sequence++, start);

  while (!open.empty()) {
    const auto [f, h, seq, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = true;

    const Cell cell = cell_of(idx);
    if (trace) trace->expanded.push_back(cell);

    if (map.is_goal(cell)) {
      GridPath path;
      for (std::int64_t at = static_cast<std::int64_t>(idx); at >= 0; at = parent[at]) {
        path.cells.push_back(cell_of(static_cast<std::size_t>(at)));
      }
      std::reverse(path.cells.begin(), path.cells.end());
      return path;
    }

    for (const auto& off : kNeighbourOffsets) {
      const Cell next{cell.row + off.row, cell.col + off.col};
      if (!map.in_bounds(next) || map.is_occupied(next)) continue;
      const std::size_t nidx = map.index(next);
      if (closed[nidx]) continue;
      const int tentative = g_score[idx] + 1;
      if (tentative >= g_score[nidx]) continue;
      g_score[nidx] = tentative;
      parent[nidx] = static_cast<std::int64_t>(idx);
      const int nh = heuristic(map, next);
      open.emplace(tentative + nh, nh, sequence++, nidx);
    }
  }
  throw NoPathError("no goal reachable from start (" + std::to_string(map.start.row) + ", " +
                    std::to_string(map.start.col) + ")");
}

namespace detail {

inline Cell direction(Cell from, Cell to) {
  const auto sgn = [](int v) { return (v > 0) - (v < 0); };
  return {sgn(to.row - from.row), sgn(to.col - from.col)};
}

}  // namespace detail

/// Keeps the endpoints and every cell where the travel direction changes.
inline GridPath simplify(const GridPath& path) {
  if (path.cells.size() <= 2) return path;
  GridPath out;
  out.cells.push_back(path.cells.front());
  for (std::size_t i = 1; i + 1 < path.cells.size(); ++i) {
    const Cell in_dir = detail::direction(path.cells[i - 1], path.cells[i]);
    const Cell out_dir = detail::direction(path.cells[i], path.cells[i + 1]);
    if (in_dir != out_dir) out.cells.push_back(path.cells[i]);
  }
  out.cells.push_back(path.cells.back());
  return out;
}

/// Turn points of `path` as world-frame cell centres.
inline Path to_waypoints(const GridPath& path, const GridMap& map) {
  Path out;
  for (const auto& cell : simplify(path).cells) out.nodes.push_back(cell_to_world(map, cell));
  return out;
}

/// Copy of `map` where every cell whose centre lies closer than `radius` to an
/// occupied cell is also occupied. Start and goal cells stay free.
inline GridMap inflate(const GridMap& map, double radius) {
  GridMap out = map;
  const int reach = static_cast<int>(std::ceil(radius / map.resolution));
  const double r2 = radius * radius;
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) {
      if (map.occupied[map.index({r, c})]) continue;
      const double px = (c + 0.5) * map.resolution;
      const double py = (r + 0.5) * map.resolution;
      bool blocked = false;
      for (int rr = std::max(r - reach, 0); !blocked && rr <= std::min(r + reach, map.height - 1);
           ++rr) {
        for (int cc = std::max(c - reach, 0); cc <= std::min(c + reach, map.width - 1); ++cc) {
          if (!map.occupied[map.index({rr, cc})]) continue;
          const double x0 = cc * map.resolution;
          const double y0 = rr * map.resolution;
          const double dx = std::max({x0 - px, 0.0, px - (x0 + map.resolution)});
          const double dy = std::max({y0 - py, 0.0, py - (y0 + map.resolution)});
          if (dx * dx + dy * dy < r2) {
            blocked = true;
            break;
          }
        }
      }
      out.occupied[out.index({r, c})] = blocked;
    }
  }
  out.occupied[out.index(out.start)] = false;
  for (const auto& g : out.goals) out.occupied[out.index(g)] = false;
  return out;
}

/// Map text with '*' on every path cell that is not 'M' or 'E'.
inline std::string render_overlay(const AsciiMap& map, const GridPath& path) {
  AsciiMap out = map;
  for (const auto& cell : path.cells) {
    if (cell.row < 0 || cell.row >= out.height() || cell.col < 0 || cell.col >= out.width()) {
      continue;
    }
    char& ch = out.rows[cell.row][cell.col];
    if (ch != 'M' && ch != 'E') ch = '*';
  }
  return render(out);
}

}  // namespace diffnav::planner
