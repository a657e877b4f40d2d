#include "toma/coopnav_env.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "toma/msmtc_env.hpp"

namespace toma {

double cn_reward(const CnState& state, const EnvConfig& cfg) {
  double total = 0.0;
  for (const auto& lm : state.landmarks) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : state.agents) best = std::min(best, norm(a.position - lm));
    total -= best;
  }
  const int n = static_cast<int>(state.agents.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (norm(state.agents[i].position - state.agents[j].position) < cfg.collision_diameter) {
        total -= 1.0;
      }
    }
  }
  return total;
}

CoopNavEnv::CoopNavEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.task = "coopnav";
  cfg_.m_targets = cfg_.n_agents;
  cfg_.validate();
}

StepResult CoopNavEnv::reset(std::uint64_t seed) {
  rng_.emplace(seed);
  Rng& rng = *rng_;
  state_ = CnState{};
  for (int i = 0; i < cfg_.n_agents; ++i) {
    CnAgent a;
    a.position = Vec2{rng.uniform(0.0, cfg_.arena_side), rng.uniform(0.0, cfg_.arena_side)};
    a.velocity = Vec2{0.0, 0.0};
    state_.agents.push_back(a);
  }
  for (int q = 0; q < cfg_.n_agents; ++q) {
    state_.landmarks.push_back(
        Vec2{rng.uniform(0.0, cfg_.arena_side), rng.uniform(0.0, cfg_.arena_side)});
  }

  StepResult res;
  for (int i = 0; i < cfg_.n_agents; ++i) res.observations.push_back(flat_observation(i));
  res.team_reward = 0.0;
  res.done = false;
  res.info.emplace_back("occupancy", task_metric());
  return res;
}

StepResult CoopNavEnv::step(const std::vector<int>& actions) {
  if (!rng_) throw std::logic_error("coopnav step before reset");
  if (static_cast<int>(actions.size()) != cfg_.n_agents) {
    throw std::invalid_argument("coopnav step: expected one action per agent");
  }
  for (int i = 0; i < cfg_.n_agents; ++i) {
    Vec2 dir;
    switch (static_cast<CnAction>(actions[i])) {
      case CnAction::Up: dir = {0.0, 1.0}; break;
      case CnAction::Down: dir = {0.0, -1.0}; break;
      case CnAction::Left: dir = {-1.0, 0.0}; break;
      case CnAction::Right: dir = {1.0, 0.0}; break;
      default: throw std::invalid_argument("coopnav step: invalid action");
    }
    auto& a = state_.agents[i];
    a.velocity = cfg_.move_step * dir;
    a.position = a.position + a.velocity;
    a.position.x = std::clamp(a.position.x, 0.0, cfg_.arena_side);
    a.position.y = std::clamp(a.position.y, 0.0, cfg_.arena_side);
  }
  ++state_.step_count;

  StepResult res;
  for (int i = 0; i < cfg_.n_agents; ++i) res.observations.push_back(flat_observation(i));
  res.team_reward = cn_reward(state_, cfg_);
  res.done = state_.step_count >= cfg_.episode_length;
  res.info.emplace_back("occupancy", task_metric());
  return res;
}

bool CoopNavEnv::landmark_visible(int agent, int q) const {
  return norm(state_.landmarks[q] - state_.agents[agent].position) <= cfg_.pose_visibility_radius;
}

std::vector<double> CoopNavEnv::flat_observation(int agent) const {
  const int n = cfg_.n_agents;
  const auto& self = state_.agents.at(agent);
  std::vector<double> obs;
  obs.reserve(4 + 4 * (n - 1) + 2 * n);
  obs.push_back(self.position.x);
  obs.push_back(self.position.y);
  obs.push_back(self.velocity.x);
  obs.push_back(self.velocity.y);
  for (int j = 0; j < n; ++j) {
    if (j == agent) continue;
    const auto& other = state_.agents[j];
    const bool in_range = norm(other.position - self.position) <= cfg_.pose_visibility_radius;
    if (in_range) {
      obs.push_back(other.position.x);
      obs.push_back(other.position.y);
      obs.push_back(other.velocity.x);
      obs.push_back(other.velocity.y);
    } else {
      obs.insert(obs.end(), {0.0, 0.0, 0.0, 0.0});
    }
  }
  for (int q = 0; q < n; ++q) {
    if (landmark_visible(agent, q)) {
      obs.push_back(state_.landmarks[q].x);
      obs.push_back(state_.landmarks[q].y);
    } else {
      obs.insert(obs.end(), {0.0, 0.0});
    }
  }
  return obs;
}

std::vector<std::array<double, 4>> CoopNavEnv::target_rows(int agent) const {
  const int n = cfg_.n_agents;
  const auto& self = state_.agents.at(agent);
  std::vector<std::array<double, 4>> rows(n, {0.0, 0.0, 0.0, 0.0});
  for (int q = 0; q < n; ++q) {
    if (!landmark_visible(agent, q)) continue;
    const Vec2 d = state_.landmarks[q] - self.position;
    rows[q] = {static_cast<double>(agent) / n, static_cast<double>(q) / n, d.x, d.y};
  }
  return rows;
}

std::vector<std::uint8_t> CoopNavEnv::target_mask(int agent) const {
  std::vector<std::uint8_t> mask(cfg_.n_agents, 0);
  for (int q = 0; q < cfg_.n_agents; ++q) mask[q] = landmark_visible(agent, q) ? 1 : 0;
  return mask;
}

std::vector<std::uint8_t> CoopNavEnv::relation_labels(int agent) const {
  const auto& self = state_.agents.at(agent);
  std::vector<std::uint8_t> labels(cfg_.n_agents, 0);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int q = 0; q < cfg_.n_agents; ++q) {
    const double d = norm(state_.landmarks[q] - self.position);
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  labels[best] = 1;
  return labels;
}

double CoopNavEnv::task_metric() const {
  int occupied = 0;
  for (const auto& lm : state_.landmarks) {
    for (const auto& a : state_.agents) {
      if (norm(a.position - lm) <= cfg_.collision_diameter) {
        ++occupied;
        break;
      }
    }
  }
  return static_cast<double>(occupied) / static_cast<double>(cfg_.n_agents);
}

void CoopNavEnv::write_replay_header(std::ostream& out) const {
  out << "task coopnav\n";
  out << "n " << cfg_.n_agents << "\n";
  out << "m " << cfg_.n_agents << "\n";
  out << "arena " << cfg_.arena_side << "\n";
  for (const auto& lm : state_.landmarks) out << "landmark " << lm.x << " " << lm.y << "\n";
}

void CoopNavEnv::write_replay_state(std::ostream& out) const {
  out << "a";
  for (const auto& a : state_.agents) out << " " << a.position.x << " " << a.position.y;
}

std::unique_ptr<Env> CoopNavEnv::clone_config() const {
  return std::make_unique<CoopNavEnv>(cfg_);
}

std::unique_ptr<Env> make_env(const EnvConfig& cfg) {
  if (cfg.task == "coopnav") return std::make_unique<CoopNavEnv>(cfg);
  return std::make_unique<MsmtcEnv>(cfg);
}

}  // namespace toma
