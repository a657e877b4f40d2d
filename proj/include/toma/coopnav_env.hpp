#pragma once

#include <optional>

#include "toma/env.hpp"
#include "toma/rng.hpp"

namespace toma {

enum class CnAction : int { Up = 0, Down = 1, Left = 2, Right = 3 };

struct CnAgent {
  Vec2 position;
  Vec2 velocity;
};

struct CnState {
  std::vector<CnAgent> agents;
  std::vector<Vec2> landmarks;
  int step_count = 0;
};

// -sum_q min_i dist(agent_i, landmark_q) minus one unit per colliding
// unordered agent pair (distance strictly below collision_diameter).
double cn_reward(const CnState& state, const EnvConfig& cfg);

// Cooperative navigation: n agents spread over n static landmarks.
class CoopNavEnv final : public Env {
 public:
  explicit CoopNavEnv(EnvConfig cfg);

  const EnvConfig& config() const override { return cfg_; }
  int n_agents() const override { return cfg_.n_agents; }
  int n_targets() const override { return cfg_.n_agents; }
  int n_actions() const override { return 4; }
  int step_count() const override { return state_.step_count; }

  StepResult reset(std::uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;

  std::vector<std::array<double, 4>> target_rows(int agent) const override;
  std::vector<std::uint8_t> target_mask(int agent) const override;
  Pose2D agent_pose(int agent) const override {
    const auto& a = state_.agents.at(agent);
    return Pose2D{a.position.x, a.position.y, 0.0};
  }

  // c_{j,q} = 1 iff landmark q is the closest one to agent j.
  std::vector<std::uint8_t> relation_labels(int agent) const override;

  // Fraction of landmarks with an agent within collision_diameter.
  double task_metric() const override;

  void set_episode_length(int length) override { cfg_.episode_length = length; }

  void write_replay_header(std::ostream& out) const override;
  void write_replay_state(std::ostream& out) const override;

  std::unique_ptr<Env> clone_config() const override;

  const CnState& state() const { return state_; }
  CnState& mutable_state() { return state_; }

  // Flat observation per the task contract: self pos/vel, masked others'
  // pos/vel, masked landmark positions.
  std::vector<double> flat_observation(int agent) const;

 private:
  bool landmark_visible(int agent, int q) const;

  EnvConfig cfg_;
  CnState state_;
  std::optional<Rng> rng_;
};

}  // namespace toma
