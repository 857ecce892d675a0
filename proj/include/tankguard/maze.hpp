#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tankguard/common.hpp"

namespace tankguard {

// Planar maze description. Geometry is desk-scale (meters); walls are
// axis-aligned rectangles, obstacles are free-sliding discs.

struct WallRect {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Zero();
};

struct ObstacleSpec {
  Vec2 center = Vec2::Zero();
  double radius = 0.015;
  double mass = 0.2;
};

struct MazeSpec {
  int schema = 1;
  std::string name;
  std::vector<WallRect> walls;
  std::vector<ObstacleSpec> obstacles;
  Vec2 start = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  double goal_radius = 0.02;
  std::vector<Vec2> spawn_points;  // reset poses for offline collection
};

// Closest point of an axis-aligned rectangle to p.
inline Vec2 rect_closest_point(const WallRect& w, const Vec2& p) {
  return Vec2(std::clamp(p[0], w.lo[0], w.hi[0]), std::clamp(p[1], w.lo[1], w.hi[1]));
}

inline double rect_distance(const WallRect& w, const Vec2& p) {
  return (p - rect_closest_point(w, p)).norm();
}

// True if a disc of the given radius at p touches no wall and no obstacle's
// rest pose.
inline bool disc_free(const MazeSpec& m, const Vec2& p, double radius) {
  for (const auto& w : m.walls)
    if (rect_distance(w, p) < radius) return false;
  for (const auto& o : m.obstacles)
    if ((p - o.center).norm() < radius + o.radius) return false;
  return true;
}

inline void validate(const MazeSpec& m, double clearance = 0.01) {
  require(m.schema == 1, "maze: unsupported schema version");
  require(!m.name.empty(), "maze: missing name");
  require(finite(m.start) && finite(m.goal), "maze: non-finite start/goal");
  require(m.goal_radius > 0.0, "maze: goal radius must be positive");
  for (const auto& w : m.walls) {
    require(finite(w.lo) && finite(w.hi), "maze: non-finite wall");
    require(w.lo[0] < w.hi[0] && w.lo[1] < w.hi[1], "maze: wall must have lo < hi");
  }
  for (const auto& o : m.obstacles) {
    require(finite(o.center), "maze: non-finite obstacle");
    require(o.radius > 0.0 && o.mass > 0.0, "maze: obstacle radius/mass must be positive");
  }
  require(disc_free(m, m.start, clearance), "maze: start pose is not in free space");
  require(disc_free(m, m.goal, clearance), "maze: goal is not in free space");
  for (const auto& s : m.spawn_points)
    require(disc_free(m, s, clearance), "maze: spawn point is not in free space");
}

inline nlohmann::json to_json(const MazeSpec& m) {
  nlohmann::json j;
  j["schema"] = m.schema;
  j["name"] = m.name;
  j["walls"] = nlohmann::json::array();
  for (const auto& w : m.walls)
    j["walls"].push_back({{"min", {w.lo[0], w.lo[1]}}, {"max", {w.hi[0], w.hi[1]}}});
  j["obstacles"] = nlohmann::json::array();
  for (const auto& o : m.obstacles)
    j["obstacles"].push_back(
        {{"center", {o.center[0], o.center[1]}}, {"radius", o.radius}, {"mass", o.mass}});
  j["start"] = {m.start[0], m.start[1]};
  j["goal"] = {m.goal[0], m.goal[1]};
  j["goal_radius"] = m.goal_radius;
  j["spawn_points"] = nlohmann::json::array();
  for (const auto& s : m.spawn_points) j["spawn_points"].push_back({s[0], s[1]});
  return j;
}

inline MazeSpec maze_from_json(const nlohmann::json& j) {
  MazeSpec m;
  try {
    m.schema = j.at("schema").get<int>();
    require(m.schema == 1, "maze: unsupported schema version");
    m.name = j.at("name").get<std::string>();
    for (const auto& w : j.at("walls")) {
      WallRect r;
      r.lo = Vec2(w.at("min")[0].get<double>(), w.at("min")[1].get<double>());
      r.hi = Vec2(w.at("max")[0].get<double>(), w.at("max")[1].get<double>());
      m.walls.push_back(r);
    }
    for (const auto& o : j.value("obstacles", nlohmann::json::array())) {
      ObstacleSpec s;
      s.center = Vec2(o.at("center")[0].get<double>(), o.at("center")[1].get<double>());
      s.radius = o.at("radius").get<double>();
      s.mass = o.at("mass").get<double>();
      m.obstacles.push_back(s);
    }
    m.start = Vec2(j.at("start")[0].get<double>(), j.at("start")[1].get<double>());
    m.goal = Vec2(j.at("goal")[0].get<double>(), j.at("goal")[1].get<double>());
    m.goal_radius = j.at("goal_radius").get<double>();
    for (const auto& s : j.value("spawn_points", nlohmann::json::array()))
      m.spawn_points.push_back(Vec2(s[0].get<double>(), s[1].get<double>()));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("maze: malformed json: ") + e.what());
  }
  validate(m);
  return m;
}

inline MazeSpec load_maze(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "maze: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("maze: parse error in ") + path + ": " + e.what());
  }
  return maze_from_json(j);
}

inline void save_maze(const MazeSpec& m, const std::string& path) {
  validate(m);
  std::ofstream out(path);
  require(out.good(), "maze: cannot write " + path);
  out << to_json(m).dump(2) << "\n";
}

}  // namespace tankguard
