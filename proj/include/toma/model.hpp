#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "toma/env.hpp"
#include "toma/nn.hpp"

namespace toma {

// Parameter partitions. Belief parameters are trained supervisedly; the rest
// by RL. The message-sender subset is tuned again during communication
// reduction.
inline constexpr const char* kBeliefPrefix = "tom.";
inline constexpr const char* kOtherPrefix = "other.";
inline constexpr const char* kCommPrefix = "other.comm.";

struct ModelConfig {
  std::string task = "msmtc";  // decision head: multi-choice vs one-choice
  int obs_dim = 4;
  int enc_hidden = 64;
  int d_enc = 64;
  int gru_hidden = 32;
  int head_hidden = 64;
  int gnn_hidden = 64;
  int critic_hidden = 192;
  int propagation_rounds = 2;
  double filter_delta = 0.5;
  double gumbel_temperature = 1.0;
};

// All networks of one (parameter-shared) agent: observation encoder, belief
// nets over other agents, graph-based message sender, actor, and the
// centralized critic. Sizes never depend on the team or target count, so one
// set of weights runs at any scale.
class TomModel {
 public:
  static TomModel create(const ModelConfig& cfg, nn::ParamStore& store, Rng& rng);
  static TomModel bind(const ModelConfig& cfg, const nn::ParamStore& store);

  ModelConfig cfg;

  nn::Dense enc1, enc2;
  nn::Attention enc_att;

  nn::GRUCell gru;
  nn::Dense gi1, gi2;  // goal-inference head
  nn::Dense oe1, oe2;  // relation (observation-estimation) head

  nn::Dense node_enc, edge_enc, psi_node, psi_edge, cls1, cls2;

  nn::Dense actor1, actor2;
  nn::Dense critic_in, critic_out;
  nn::Attention critic_att;

  // Per-target encodings E_i; masked rows come out zero.
  nn::Tensor encode(const nn::Tensor& rows, const std::vector<std::uint8_t>& mask) const;

  // One recurrent belief update from another agent's (relative) pose.
  nn::Tensor tom_estimate(const nn::Tensor& pose_rel, const nn::Tensor& hidden) const;

  // Per-target probability vectors [m] from encodings and a belief embedding.
  nn::Tensor infer_goals(const nn::Tensor& E, const nn::Tensor& eps) const;
  nn::Tensor infer_relation(const nn::Tensor& E, const nn::Tensor& eps) const;
  // Pre-sigmoid versions, for numerically stable training losses.
  nn::Tensor infer_goal_logits(const nn::Tensor& E, const nn::Tensor& eps) const;
  nn::Tensor infer_relation_logits(const nn::Tensor& E, const nn::Tensor& eps) const;

  // Node filter: u[j] = (sum_q [gstar_jq > delta] E_q, eps_j), self row is
  // (sum_q E_q, eps_self).
  nn::Tensor build_node_features(const nn::Tensor& E, const std::vector<nn::Tensor>& eps_rows,
                                 const std::vector<nn::Tensor>& gstar_rows,
                                 const nn::Tensor& eps_self, int self_index) const;

  struct GraphResult {
    nn::Tensor edge_init;   // [n(n-1), gnn_hidden]
    nn::Tensor edge_final;  // [n(n-1), gnn_hidden]
    std::vector<std::pair<int, int>> pairs;  // (sender, receiver), lexicographic
  };
  // Interaction-network style propagation over the full directed graph.
  GraphResult propagate_graph(const nn::Tensor& u, int rounds) const;

  // (cut, retain) logits for each of `sender`'s outgoing edges, receiver
  // ascending.
  nn::Tensor outgoing_edge_logits(const GraphResult& graph, int sender, int n) const;

  // Per-target actor logits from the actor feature rows [m, d_enc + 2].
  nn::Tensor actor_logits(const nn::Tensor& eta) const;

  // Centralized value from every agent's actor feature; permutation-invariant
  // at the bit level (rows are canonically ordered internally).
  nn::Tensor critic_value(const std::vector<nn::Tensor>& etas) const;
};

// Another agent's pose expressed in the observer's frame (translation rotated
// into the observer heading, relative yaw).
std::array<double, 3> egocentric_pose(const Pose2D& observer, const Pose2D& other);

// --- team forward pass ----------------------------------------------------

enum class GradFlow {
  None,    // rollout / evaluation: no graph
  Policy,  // RL: belief nets detached, everything else differentiable
  Belief,  // supervised belief learning: encoder detached, heads + GRU differentiable
  Comm,    // communication-reduction tuning: only the message sender differentiable
};

struct DecisionInputs {
  std::vector<std::vector<double>> rows;          // per agent, m*4
  std::vector<std::vector<std::uint8_t>> masks;   // per agent, m
  std::vector<Pose2D> poses;

  static DecisionInputs capture(const Env& env);
};

// Randomness consumed by one team decision, recorded so an update pass can
// replay the exact rollout sample.
struct StepNoise {
  std::vector<std::vector<double>> edge_gumbel;  // per agent, 2*(n-1)
  std::vector<std::vector<int>> goals;           // per agent, binary over targets
};

struct AgentDecision {
  std::vector<int> goal;                   // binary per target (one-choice: one-hot)
  int goal_index = -1;                     // one-choice tasks
  std::vector<std::uint8_t> retained;      // outgoing edges, receiver ascending
  std::vector<std::uint8_t> forced_cut;    // pose-masked edges
  std::vector<double> p_retain;            // per outgoing edge
  std::vector<double> probs;               // decision distribution (masked)
  std::vector<double> probs_nomsg;         // counterfactual, when requested
  nn::Tensor edge_logits;                  // [n-1, 2], graph in Comm flow
  nn::Tensor logprob;                      // [1]
  nn::Tensor entropy;                      // [1]
  nn::Tensor gstar;                        // [n-1, m] probabilities
  nn::Tensor cstar;                        // [n-1, m]
  nn::Tensor gstar_logits;                 // [n-1, m], graph in Belief flow
  nn::Tensor cstar_logits;                 // [n-1, m]
  std::vector<std::uint8_t> tom_row_ok;    // pose-mask state per modeled agent
};

struct TeamDecision {
  std::vector<AgentDecision> agents;
  nn::Tensor value;                              // defined iff with_critic
  std::vector<std::pair<int, int>> comm_edges;   // delivered messages i->j
};

// Runs the per-agent pipeline for a whole team, one decision at a time,
// carrying the belief GRU hidden state across decisions within an episode.
class TeamPipeline {
 public:
  TeamPipeline(const TomModel* model, int n_agents, int m_targets, double pose_mask_radius);

  void reset();

  // `replay` substitutes recorded randomness (update passes); otherwise
  // `sample_rng` draws fresh samples, recorded into `record` when given.
  // `deterministic` switches both edge choice and goal choice to argmax.
  TeamDecision decide(const DecisionInputs& in, GradFlow flow, bool deterministic,
                      Rng* sample_rng, const StepNoise* replay, bool with_critic,
                      bool both_modes, StepNoise* record = nullptr);

  int n_agents() const { return n_; }
  int m_targets() const { return m_; }

 private:
  const TomModel* model_;
  int n_ = 0;
  int m_ = 0;
  double pose_mask_radius_ = 0.0;
  std::vector<std::vector<nn::Tensor>> hidden_;  // [observer][modeled agent]
};

// Rule-based executors translating a fixed sub-goal into primitive actions.
int executor_msmtc(const std::vector<std::array<double, 4>>& rows,
                   const std::vector<std::uint8_t>& mask, const std::vector<int>& goal);
int executor_cn(const std::vector<std::array<double, 4>>& rows, int goal_index);

}  // namespace toma
