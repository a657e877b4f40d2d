#pragma once

#include <optional>

#include "toma/env.hpp"
#include "toma/rng.hpp"

namespace toma {

enum class MsmtcAction : int { Stay = 0, RotLeft = 1, RotRight = 2 };

inline constexpr double kRotStep = kPi / 36.0;  // 5 degrees

struct MsmtcState {
  std::vector<Pose2D> sensors;  // positions fixed per episode, yaw mutable
  std::vector<TargetState> targets;
  std::vector<Obstacle> obstacles;
  int step_count = 0;
};

// Coverage needs visibility plus the FOV sector (closed at the boundary).
bool covered(const Pose2D& sensor, Vec2 target_pos, const std::vector<Obstacle>& obstacles,
             const EnvConfig& cfg);

// Fraction of targets covered by at least one sensor; -0.1 when none is.
double msmtc_reward(const MsmtcState& state, const EnvConfig& cfg);

// Directional-sensor coverage task: rotating sensors, moving targets of mixed
// motion type, circular occluders, shared team reward.
class MsmtcEnv final : public Env {
 public:
  explicit MsmtcEnv(EnvConfig cfg);

  const EnvConfig& config() const override { return cfg_; }
  int n_agents() const override { return cfg_.n_agents; }
  int n_targets() const override { return cfg_.m_targets; }
  int n_actions() const override { return 3; }
  int step_count() const override { return state_.step_count; }

  StepResult reset(std::uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;

  std::vector<std::array<double, 4>> target_rows(int agent) const override;
  std::vector<std::uint8_t> target_mask(int agent) const override;
  Pose2D agent_pose(int agent) const override { return state_.sensors.at(agent); }

  // c_{j,q} = 1 iff target q is in agent j's observation field.
  std::vector<std::uint8_t> relation_labels(int agent) const override {
    return target_mask(agent);
  }

  double task_metric() const override;

  void set_episode_length(int length) override { cfg_.episode_length = length; }

  void write_replay_header(std::ostream& out) const override;
  void write_replay_state(std::ostream& out) const override;

  std::unique_ptr<Env> clone_config() const override;

  const MsmtcState& state() const { return state_; }
  MsmtcState& mutable_state() { return state_; }

 private:
  std::vector<std::vector<double>> build_observations() const;

  EnvConfig cfg_;
  MsmtcState state_;
  std::optional<Rng> rng_;
};

}  // namespace toma
