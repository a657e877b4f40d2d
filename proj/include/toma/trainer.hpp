#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "toma/env.hpp"
#include "toma/model.hpp"
#include "toma/nn.hpp"

namespace toma {

struct TrainConfig {
  long long max_steps = 3000000;
  int workers = 6;
  int update_every = 20;        // low-level steps per worker per update round
  double entropy_weight = 0.005;
  double lr = 1e-3;
  int tom_freeze = 5;           // belief update every T_F RL updates
  double gamma_rate = 0.002;    // beta
  long long warmup_episodes = 2000;
  double gamma0 = 0.1;
  int episode_len0 = 20;
  double cr_threshold = 0.05;   // tau
  int cr_updates = 0;           // post-phase rounds (0 disables)
  long long checkpoint_every = 100000;  // env steps between checkpoints
  std::uint64_t seed = 0;

  void validate() const;
};

struct RunConfig {
  EnvConfig env;
  TrainConfig train;
};

RunConfig run_config_from_entries(const std::vector<KvEntry>& entries);
RunConfig load_run_config(const std::string& path);
RunConfig apply_run_overrides(RunConfig cfg, const std::vector<KvEntry>& overrides);

// --- curriculum -----------------------------------------------------------

struct Curriculum {
  double gamma = 0.1;
  int episode_len = 20;
};

// L(gamma) = floor((gamma + 0.1) / 0.2) * 20, computed as floor(5g + 0.5) * 20
// which is algebraically identical and exact at the schedule boundaries.
int curriculum_episode_len(double gamma);
Curriculum curriculum_tick(double gamma, const TrainConfig& cfg);

// --- rollout data ----------------------------------------------------------

struct HighLevelStep {
  DecisionInputs inputs;
  StepNoise noise;  // goals double as belief-learning labels
  std::vector<std::vector<std::uint8_t>> retained;
  std::vector<std::vector<std::uint8_t>> forced;
  std::vector<std::vector<std::uint8_t>> relation_labels;  // per agent, m
  std::vector<std::vector<double>> probs_with;    // acting distribution
  std::vector<std::vector<double>> probs_nomsg;   // counterfactual (CR phase)
  double reward = 0.0;  // summed over the K low-level steps that follow
};

struct EpisodeData {
  std::vector<HighLevelStep> steps;
  double bootstrap_value = 0.0;
  int env_steps = 0;
  double mean_reward = 0.0;  // per low-level step
  double mean_metric = 0.0;
  long long comm_edges = 0;  // total over decision steps
};

struct RolloutBatch {
  std::vector<EpisodeData> episodes;
  long long env_steps = 0;
  double pose_mask_radius = std::numeric_limits<double>::infinity();

  double mean_reward() const;
  double mean_metric() const;
  double mean_edges_per_decision() const;
  long long decision_count() const;
};

// Synchronous collection: every worker runs whole episodes (at least
// update_every low-level steps each) against the shared parameter snapshot.
// Deterministic given (cfg seeds, round index).
RolloutBatch collect_rollouts(const EnvConfig& env_cfg, const TomModel& model,
                              const TrainConfig& cfg, int episode_len, std::uint64_t round_index,
                              bool both_modes);

// --- updates ---------------------------------------------------------------

struct A2CLosses {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

A2CLosses a2c_update(const RolloutBatch& batch, const TomModel& model, nn::ParamStore& store,
                     const nn::AdamOptimizer& opt, const TrainConfig& cfg, double gamma,
                     bool apply = true);

struct TomLosses {
  double gi = 0.0;
  double oe = 0.0;
  double gi_acc = 0.0;
  double oe_acc = 0.0;
};

TomLosses tom_update(const std::vector<RolloutBatch>& buffered, const TomModel& model,
                     nn::ParamStore& store, const nn::AdamOptimizer& opt, const TrainConfig& cfg,
                     bool apply = true);

struct CrResult {
  double loss = 0.0;
  long long labeled_edges = 0;
  long long retain_labels = 0;
  double mean_p_retain = 0.0;
};

CrResult cr_tune(const RolloutBatch& batch, const TomModel& model, nn::ParamStore& store,
                 const nn::AdamOptimizer& opt, const TrainConfig& cfg, bool apply = true);

// KL(no-message distribution || acting distribution) for one agent's decision.
double decision_kl(const std::vector<double>& p_nomsg, const std::vector<double>& p_with,
                   const std::vector<std::uint8_t>& mask, bool one_choice);

// --- driver ----------------------------------------------------------------

struct TrainResult {
  std::string final_checkpoint;
  long long env_steps = 0;
  long long episodes = 0;
};

TrainResult train(const RunConfig& cfg, const std::string& run_dir,
                  const std::string& resume_checkpoint = "");

ModelConfig model_config_for(const EnvConfig& env_cfg);

}  // namespace toma
