#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "toma/env_config.hpp"
#include "toma/geometry.hpp"

namespace toma {

struct StepResult {
  std::vector<std::vector<double>> observations;  // per agent, flattened
  double team_reward = 0.0;
  bool done = false;
  std::vector<std::pair<std::string, double>> info;
};

// Common environment contract. Target rows are the model-facing per-target
// relation features, already expressed in the observing agent's frame, so
// everything a policy consumes through this interface is local to that agent
// (poses excepted, which the tasks treat as shared knowledge).
class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvConfig& config() const = 0;
  virtual int n_agents() const = 0;
  virtual int n_targets() const = 0;
  virtual int n_actions() const = 0;
  virtual int step_count() const = 0;

  virtual StepResult reset(std::uint64_t seed) = 0;
  virtual StepResult step(const std::vector<int>& actions) = 0;

  // m rows of 4 features each; invisible targets are all-zero rows.
  virtual std::vector<std::array<double, 4>> target_rows(int agent) const = 0;
  virtual std::vector<std::uint8_t> target_mask(int agent) const = 0;
  virtual Pose2D agent_pose(int agent) const = 0;

  // Ground-truth relation vector c_j used to supervise belief learning.
  virtual std::vector<std::uint8_t> relation_labels(int agent) const = 0;

  // Task progress in [0, 1]: coverage rate / landmark occupancy.
  virtual double task_metric() const = 0;

  // Curriculum support: episode horizon for subsequent resets.
  virtual void set_episode_length(int length) = 0;

  // Replay serialization (header once, one state line fragment per step).
  virtual void write_replay_header(std::ostream& out) const = 0;
  virtual void write_replay_state(std::ostream& out) const = 0;

  virtual std::unique_ptr<Env> clone_config() const = 0;
};

std::unique_ptr<Env> make_env(const EnvConfig& cfg);

}  // namespace toma
