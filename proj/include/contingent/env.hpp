#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "contingent/errors.hpp"
#include "contingent/rng.hpp"

namespace contingent {

enum class Corridor { left = 0, middle = 1, right = 2, none = 3 };

inline const char* corridor_name(Corridor c) {
  switch (c) {
    case Corridor::left: return "left";
    case Corridor::middle: return "middle";
    case Corridor::right: return "right";
    default: return "none";
  }
}

struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  // open interior: standing exactly on an edge is legal
  bool contains_open(double x, double y) const {
    return x > x0 && x < x1 && y > y0 && y < y1;
  }
  bool contains_closed(double x, double y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
};

// Three vertical corridors joining a bottom chamber (start) to a top chamber
// (goal). Corridor width 0.12 at x-centers 0.2 / 0.5 / 0.8; chambers are the
// y < 0.15 and y > 0.85 bands. Middle corridor is the straight shot, so it is
// the strictly shortest route.
struct WorldGeometry {
  std::array<Rect, 4> walls;
  std::array<Rect, 3> corridor_bands;   // closed bands used by corridor_of
  std::array<Rect, 3> blockade_slots;   // mid-height plug per corridor
  std::array<bool, 3> blockade_active{false, false, false};
  double start_x = 0.5, start_y = 0.075;
  double goal_x = 0.5, goal_y = 0.925, goal_r = 0.05;

  static WorldGeometry standard() {
    WorldGeometry g;
    const double ylo = 0.15, yhi = 0.85;
    // outer walls spill past the bounds so the x=0 and x=1 boundary lines sit
    // in their open interiors; otherwise those lines form zero-width passages
    g.walls = {Rect{-0.01, ylo, 0.14, yhi}, Rect{0.26, ylo, 0.44, yhi},
               Rect{0.56, ylo, 0.74, yhi}, Rect{0.86, ylo, 1.01, yhi}};
    g.corridor_bands = {Rect{0.14, ylo, 0.26, yhi}, Rect{0.44, ylo, 0.56, yhi},
                        Rect{0.74, ylo, 0.86, yhi}};
    for (int c = 0; c < 3; ++c) {
      // plugs overlap 0.02 into the flanking walls; a slot that only met the
      // walls edge-to-edge would leave a zero-width seam open to sliding
      const Rect& band = g.corridor_bands[c];
      g.blockade_slots[c] = Rect{band.x0 - 0.02, 0.48, band.x1 + 0.02, 0.52};
    }
    return g;
  }

  bool collides(double x, double y) const {
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) return true;
    for (const Rect& w : walls)
      if (w.contains_open(x, y)) return true;
    for (int c = 0; c < 3; ++c)
      if (blockade_active[c] && blockade_slots[c].contains_open(x, y)) return true;
    return false;
  }

  bool in_goal(double x, double y) const {
    const double dx = x - goal_x, dy = y - goal_y;
    return dx * dx + dy * dy <= goal_r * goal_r;
  }

  // First matching band wins, so shared boundaries resolve to the lower index.
  Corridor corridor_of(double x, double y) const {
    for (int c = 0; c < 3; ++c)
      if (corridor_bands[c].contains_closed(x, y)) return static_cast<Corridor>(c);
    return Corridor::none;
  }
};

struct EnvState {
  double x = 0, y = 0;
  int steps = 0;
};

struct StepResult {
  EnvState next;
  double reward = 0;
  bool terminal = false;
  bool collided = false;
};

inline constexpr double kStepSize = 0.03;
inline constexpr int kMaxEpisodeSteps = 300;
inline constexpr double kStepPenalty = -0.1;
inline constexpr double kGoalBonus = 10.0;

// Pure transition: per-axis resolution (x first), a move that would land
// inside a wall, an active blockade, or out of bounds is cancelled for that
// axis only, so sliding along walls works.
inline StepResult env_step(const WorldGeometry& g, const EnvState& s,
                           const double* action, int max_steps = kMaxEpisodeSteps) {
  auto clamp1 = [](double v) { return v > 1.0 ? 1.0 : (v < -1.0 ? -1.0 : v); };
  const double dx = kStepSize * clamp1(action[0]);
  const double dy = kStepSize * clamp1(action[1]);
  StepResult r;
  double nx = s.x + dx, ny = s.y;
  if (g.collides(nx, ny)) {
    nx = s.x;
    r.collided = true;
  }
  ny = s.y + dy;
  if (g.collides(nx, ny)) {
    ny = s.y;
    r.collided = true;
  }
  r.next = EnvState{nx, ny, s.steps + 1};
  const bool goal = g.in_goal(nx, ny);
  r.reward = kStepPenalty + (goal ? kGoalBonus : 0.0);
  r.terminal = goal || r.next.steps >= max_steps;
  return r;
}

// Stateful wrapper owning a geometry and the current agent position.
class Env {
 public:
  Env() : geo_(WorldGeometry::standard()) {}
  explicit Env(WorldGeometry g) : geo_(std::move(g)) {}

  // uniform noise on a disc of radius 0.01 around the start point
  EnvState reset(Rng& rng) {
    const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double rad = 0.01 * std::sqrt(rng.uniform01());
    st_ = EnvState{geo_.start_x + rad * std::cos(ang), geo_.start_y + rad * std::sin(ang), 0};
    return st_;
  }

  StepResult step(const double* action, int max_steps = kMaxEpisodeSteps) {
    StepResult r = env_step(geo_, st_, action, max_steps);
    st_ = r.next;
    return r;
  }

  void set_state(double x, double y, int steps) {
    if (geo_.collides(x, y))
      throw StructuralError("set_state: position (" + std::to_string(x) + ", " +
                            std::to_string(y) + ") is inside an obstacle");
    st_ = EnvState{x, y, steps};
  }

  void set_blockade(Corridor c, bool active) {
    if (c == Corridor::none) throw StructuralError("set_blockade: no such corridor");
    geo_.blockade_active[static_cast<int>(c)] = active;
  }

  const WorldGeometry& geometry() const { return geo_; }
  const EnvState& state() const { return st_; }
  Corridor corridor_of(double x, double y) const { return geo_.corridor_of(x, y); }

  void observe(double* obs) const {
    obs[0] = st_.x;
    obs[1] = st_.y;
  }

 private:
  WorldGeometry geo_;
  EnvState st_;
};

}  // namespace contingent
