#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace toma {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

// Heading-carrying planar pose. yaw is kept normalized in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

enum class MotionKind { DestinationNav, RandomWalk };

struct TargetState {
  Vec2 position;
  MotionKind motion_kind = MotionKind::RandomWalk;
  std::optional<Vec2> destination;  // present iff DestinationNav
  double speed = 0.0;
};

struct Obstacle {
  Vec2 center;
  double radius = 0.0;
};

// Maps any finite angle to its representative in (-pi, pi].
inline double normalize_angle(double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("normalize_angle: non-finite angle");
  double r = std::fmod(theta + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

struct RelObs {
  double dist = 0.0;
  double alpha = 0.0;  // bearing relative to the agent heading, in (-pi, pi]
};

inline RelObs relative_obs(const Pose2D& agent, Vec2 target_pos) {
  const double dx = target_pos.x - agent.x;
  const double dy = target_pos.y - agent.y;
  RelObs r;
  r.dist = std::hypot(dx, dy);
  r.alpha = normalize_angle(std::atan2(dy, dx) - agent.yaw);
  return r;
}

// True iff the closed segment p-q intersects the closed disk of `obs`.
inline bool segment_blocked(Vec2 p, Vec2 q, const Obstacle& obs) {
  const Vec2 d = q - p;
  const double len2 = dot(d, d);
  if (len2 == 0.0) throw std::invalid_argument("segment_blocked: degenerate segment");
  double t = dot(obs.center - p, d) / len2;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 closest = p + t * d;
  return norm(obs.center - closest) <= obs.radius;
}

// Omnidirectional sensing: within radius and not occluded. The FOV sector
// matters for coverage, not for sensing.
inline bool visible(const Pose2D& agent, Vec2 target_pos, const std::vector<Obstacle>& obstacles,
                    double sense_radius) {
  const Vec2 a{agent.x, agent.y};
  const double d = norm(target_pos - a);
  if (d > sense_radius) return false;
  if (d == 0.0) return true;
  for (const auto& obs : obstacles) {
    if (segment_blocked(a, target_pos, obs)) return false;
  }
  return true;
}

}  // namespace toma
