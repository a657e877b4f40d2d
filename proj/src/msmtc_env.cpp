#include "toma/msmtc_env.hpp"

#include <cmath>
#include <stdexcept>

namespace toma {

bool covered(const Pose2D& sensor, Vec2 target_pos, const std::vector<Obstacle>& obstacles,
             const EnvConfig& cfg) {
  if (!visible(sensor, target_pos, obstacles, cfg.sense_radius)) return false;
  const RelObs rel = relative_obs(sensor, target_pos);
  return std::abs(rel.alpha) <= cfg.fov_halfangle;
}

double msmtc_reward(const MsmtcState& state, const EnvConfig& cfg) {
  const int m = static_cast<int>(state.targets.size());
  int n_covered = 0;
  for (const auto& target : state.targets) {
    for (const auto& sensor : state.sensors) {
      if (covered(sensor, target.position, state.obstacles, cfg)) {
        ++n_covered;
        break;
      }
    }
  }
  if (n_covered == 0) return -0.1;
  return static_cast<double>(n_covered) / static_cast<double>(m);
}

MsmtcEnv::MsmtcEnv(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

StepResult MsmtcEnv::reset(std::uint64_t seed) {
  rng_.emplace(seed);
  Rng& rng = *rng_;
  state_ = MsmtcState{};

  for (int i = 0; i < cfg_.n_agents; ++i) {
    Pose2D p;
    p.x = rng.uniform(0.0, cfg_.arena_side);
    p.y = rng.uniform(0.0, cfg_.arena_side);
    p.yaw = rng.angle();
    state_.sensors.push_back(p);
  }

  constexpr int kMaxRetries = 200;
  for (int k = 0; k < cfg_.n_obstacles; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxRetries && !placed; ++attempt) {
      Obstacle obs;
      obs.radius = rng.uniform(cfg_.obstacle_radius_min, cfg_.obstacle_radius_max);
      if (2.0 * obs.radius >= cfg_.arena_side) continue;
      obs.center.x = rng.uniform(obs.radius, cfg_.arena_side - obs.radius);
      obs.center.y = rng.uniform(obs.radius, cfg_.arena_side - obs.radius);
      bool clear = true;
      for (const auto& s : state_.sensors) {
        if (norm(Vec2{s.x, s.y} - obs.center) <= obs.radius) {
          clear = false;
          break;
        }
      }
      if (clear) {
        state_.obstacles.push_back(obs);
        placed = true;
      }
    }
    if (!placed) {
      throw std::runtime_error("msmtc reset: obstacle placement failed after retries "
                               "(arena too dense)");
    }
  }

  for (int q = 0; q < cfg_.m_targets; ++q) {
    TargetState t;
    t.position.x = rng.uniform(0.0, cfg_.arena_side);
    t.position.y = rng.uniform(0.0, cfg_.arena_side);
    t.speed = cfg_.target_speed;
    if (rng.bernoulli(cfg_.random_walk_prob)) {
      t.motion_kind = MotionKind::RandomWalk;
    } else {
      t.motion_kind = MotionKind::DestinationNav;
      t.destination = Vec2{rng.uniform(0.0, cfg_.arena_side), rng.uniform(0.0, cfg_.arena_side)};
    }
    state_.targets.push_back(t);
  }

  StepResult res;
  res.observations = build_observations();
  res.team_reward = 0.0;
  res.done = false;
  res.info.emplace_back("coverage", task_metric());
  return res;
}

StepResult MsmtcEnv::step(const std::vector<int>& actions) {
  if (!rng_) throw std::logic_error("msmtc step before reset");
  if (static_cast<int>(actions.size()) != cfg_.n_agents) {
    throw std::invalid_argument("msmtc step: expected one action per sensor");
  }
  for (int i = 0; i < cfg_.n_agents; ++i) {
    double delta = 0.0;
    switch (static_cast<MsmtcAction>(actions[i])) {
      case MsmtcAction::Stay: delta = 0.0; break;
      case MsmtcAction::RotLeft: delta = kRotStep; break;
      case MsmtcAction::RotRight: delta = -kRotStep; break;
      default: throw std::invalid_argument("msmtc step: invalid action");
    }
    state_.sensors[i].yaw = normalize_angle(state_.sensors[i].yaw + delta);
  }

  Rng& rng = *rng_;
  for (auto& t : state_.targets) {
    if (t.motion_kind == MotionKind::DestinationNav) {
      const Vec2 to_dest = *t.destination - t.position;
      const double d = norm(to_dest);
      if (d < t.speed || d == 0.0) {
        t.position = *t.destination;
        t.destination = Vec2{rng.uniform(0.0, cfg_.arena_side), rng.uniform(0.0, cfg_.arena_side)};
      } else {
        t.position = t.position + (t.speed / d) * to_dest;
      }
    } else {
      const double theta = rng.angle();
      t.position.x += t.speed * std::cos(theta);
      t.position.y += t.speed * std::sin(theta);
      t.position.x = std::clamp(t.position.x, 0.0, cfg_.arena_side);
      t.position.y = std::clamp(t.position.y, 0.0, cfg_.arena_side);
    }
  }

  ++state_.step_count;

  StepResult res;
  res.observations = build_observations();
  res.team_reward = msmtc_reward(state_, cfg_);
  res.done = state_.step_count >= cfg_.episode_length;
  res.info.emplace_back("coverage", task_metric());
  return res;
}

std::vector<std::array<double, 4>> MsmtcEnv::target_rows(int agent) const {
  const Pose2D& s = state_.sensors.at(agent);
  const int n = cfg_.n_agents;
  const int m = cfg_.m_targets;
  std::vector<std::array<double, 4>> rows(m, {0.0, 0.0, 0.0, 0.0});
  for (int q = 0; q < m; ++q) {
    const auto& t = state_.targets[q];
    if (!visible(s, t.position, state_.obstacles, cfg_.sense_radius)) continue;
    const RelObs rel = relative_obs(s, t.position);
    rows[q] = {static_cast<double>(agent) / n, static_cast<double>(q) / m, rel.dist, rel.alpha};
  }
  return rows;
}

std::vector<std::uint8_t> MsmtcEnv::target_mask(int agent) const {
  const Pose2D& s = state_.sensors.at(agent);
  std::vector<std::uint8_t> mask(cfg_.m_targets, 0);
  for (int q = 0; q < cfg_.m_targets; ++q) {
    mask[q] = visible(s, state_.targets[q].position, state_.obstacles, cfg_.sense_radius) ? 1 : 0;
  }
  return mask;
}

double MsmtcEnv::task_metric() const {
  int n_covered = 0;
  for (const auto& t : state_.targets) {
    for (const auto& s : state_.sensors) {
      if (covered(s, t.position, state_.obstacles, cfg_)) {
        ++n_covered;
        break;
      }
    }
  }
  return static_cast<double>(n_covered) / static_cast<double>(cfg_.m_targets);
}

std::vector<std::vector<double>> MsmtcEnv::build_observations() const {
  std::vector<std::vector<double>> obs(cfg_.n_agents);
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const auto rows = target_rows(i);
    auto& flat = obs[i];
    flat.reserve(rows.size() * 4);
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  }
  return obs;
}

void MsmtcEnv::write_replay_header(std::ostream& out) const {
  out << "task msmtc\n";
  out << "n " << cfg_.n_agents << "\n";
  out << "m " << cfg_.m_targets << "\n";
  out << "arena " << cfg_.arena_side << "\n";
  out << "sense_radius " << cfg_.sense_radius << "\n";
  out << "fov_halfangle " << cfg_.fov_halfangle << "\n";
  for (const auto& s : state_.sensors) out << "sensor " << s.x << " " << s.y << "\n";
  for (const auto& o : state_.obstacles) {
    out << "obstacle " << o.center.x << " " << o.center.y << " " << o.radius << "\n";
  }
}

void MsmtcEnv::write_replay_state(std::ostream& out) const {
  out << "y";
  for (const auto& s : state_.sensors) out << " " << s.yaw;
  out << " t";
  for (const auto& t : state_.targets) out << " " << t.position.x << " " << t.position.y;
}

std::unique_ptr<Env> MsmtcEnv::clone_config() const { return std::make_unique<MsmtcEnv>(cfg_); }

}  // namespace toma
