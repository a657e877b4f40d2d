#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "toma/env.hpp"
#include "toma/model.hpp"
#include "toma/rng.hpp"

namespace toma {

struct EvalReport {
  double mean_reward = 0.0, std_reward = 0.0;
  double mean_metric = 0.0, std_metric = 0.0;      // coverage / occupancy
  double mean_edges = 0.0, std_edges = 0.0;        // per decision step
  double mean_bandwidth = 0.0, std_bandwidth = 0.0;
  double tom_gi_acc = 0.0, tom_oe_acc = 0.0;
  bool has_tom_acc = false;
  int episodes = 0;

  void write_csv(const std::string& path) const;
  std::string to_text() const;
};

// Counters a policy reports after each low-level step.
struct StepTrace {
  bool decided = false;
  std::vector<std::pair<int, int>> comm;
  long long gi_correct = 0, gi_total = 0;
  long long oe_correct = 0, oe_total = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode(const Env& env) = 0;
  virtual std::vector<int> act(const Env& env, Rng& rng) = 0;
  virtual const StepTrace& trace() const { return trace_; }
  virtual bool reports_tom_accuracy() const { return false; }

 protected:
  StepTrace trace_;
};

// Learned policy: decides sub-goals every K steps, executes with the
// rule-based executors in between.
class TomPolicy : public Policy {
 public:
  TomPolicy(const TomModel* model, bool greedy, double pose_mask_radius);
  void begin_episode(const Env& env) override;
  std::vector<int> act(const Env& env, Rng& rng) override;
  bool reports_tom_accuracy() const override { return true; }

 private:
  const TomModel* model_;
  bool greedy_;
  double pose_mask_radius_;
  std::unique_ptr<TeamPipeline> pipeline_;
  std::vector<std::vector<int>> goals_;
  std::vector<int> goal_index_;
};

// Privileged exhaustive-search baseline (coverage task only); no messaging.
class HeuristicPolicy : public Policy {
 public:
  void begin_episode(const Env& env) override;
  std::vector<int> act(const Env& env, Rng& rng) override;
};

// Uniform random sub-goal over visible targets every K steps, same executors.
class RandomGoalPolicy : public Policy {
 public:
  void begin_episode(const Env& env) override;
  std::vector<int> act(const Env& env, Rng& rng) override;

 private:
  std::vector<std::vector<int>> goals_;
  std::vector<int> goal_index_;
};

struct EvalOptions {
  int episodes = 100;
  std::uint64_t seed = 1000;  // episode e uses seed + e
  std::string replay_dir;     // per-episode replays when nonempty
};

EvalReport eval_policy(Policy& policy, const EnvConfig& cfg, const EvalOptions& opt);

// Thresholded binary accuracy of goal/relation predictions against labels.
std::pair<double, double> tom_accuracy(const std::vector<double>& gstar,
                                       const std::vector<std::uint8_t>& goal_labels,
                                       const std::vector<double>& cstar,
                                       const std::vector<std::uint8_t>& relation_labels,
                                       double delta = 0.5);

struct GridResult {
  std::vector<int> agent_counts;
  std::vector<int> target_counts;
  std::vector<double> ratios;  // row-major, agents x targets
};

// Coverage of the learned policy divided by coverage of the search baseline,
// over a grid of team/target sizes.
GridResult scalability_grid(const TomModel& model, const EnvConfig& base,
                            const std::vector<int>& agent_counts,
                            const std::vector<int>& target_counts, int episodes,
                            std::uint64_t seed);
void write_grid_csv(const GridResult& grid, const std::string& path);

}  // namespace toma
