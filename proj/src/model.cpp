#include "toma/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "toma/coopnav_env.hpp"
#include "toma/msmtc_env.hpp"

namespace toma {

using nn::Tensor;

TomModel TomModel::create(const ModelConfig& cfg, nn::ParamStore& store, Rng& rng) {
  TomModel m;
  m.cfg = cfg;
  m.enc1 = nn::Dense::create(store, "other.enc.fc1", cfg.obs_dim, cfg.enc_hidden, rng);
  m.enc2 = nn::Dense::create(store, "other.enc.fc2", cfg.enc_hidden, cfg.d_enc, rng);
  m.enc_att = nn::Attention::create(store, "other.enc.att", cfg.d_enc, cfg.d_enc, rng);

  m.gru = nn::GRUCell::create(store, "tom.gru", 3, cfg.gru_hidden, rng);
  m.gi1 = nn::Dense::create(store, "tom.gi.fc1", cfg.d_enc + cfg.gru_hidden, cfg.head_hidden, rng);
  m.gi2 = nn::Dense::create(store, "tom.gi.fc2", cfg.head_hidden, 1, rng);
  m.oe1 = nn::Dense::create(store, "tom.oe.fc1", cfg.d_enc + cfg.gru_hidden, cfg.head_hidden, rng);
  m.oe2 = nn::Dense::create(store, "tom.oe.fc2", cfg.head_hidden, 1, rng);

  const int node_dim = cfg.d_enc + cfg.gru_hidden;
  m.node_enc = nn::Dense::create(store, "other.comm.node", node_dim, cfg.gnn_hidden, rng);
  m.edge_enc = nn::Dense::create(store, "other.comm.edge", 2 * node_dim, cfg.gnn_hidden, rng);
  m.psi_node = nn::Dense::create(store, "other.comm.psi_node", 3 * cfg.gnn_hidden, cfg.gnn_hidden, rng);
  m.psi_edge = nn::Dense::create(store, "other.comm.psi_edge", 3 * cfg.gnn_hidden, cfg.gnn_hidden, rng);
  m.cls1 = nn::Dense::create(store, "other.comm.cls1", 2 * cfg.gnn_hidden, cfg.head_hidden, rng);
  m.cls2 = nn::Dense::create(store, "other.comm.cls2", cfg.head_hidden, 2, rng);

  m.actor1 = nn::Dense::create(store, "other.actor.fc1", cfg.d_enc + 2, cfg.head_hidden, rng);
  m.actor2 = nn::Dense::create(store, "other.actor.fc2", cfg.head_hidden, 1, rng);
  m.critic_in = nn::Dense::create(store, "other.critic.in", cfg.d_enc + 2, cfg.critic_hidden, rng);
  m.critic_att =
      nn::Attention::create(store, "other.critic.att", cfg.critic_hidden, cfg.critic_hidden, rng);
  m.critic_out = nn::Dense::create(store, "other.critic.out", cfg.critic_hidden, 1, rng);
  return m;
}

TomModel TomModel::bind(const ModelConfig& cfg, const nn::ParamStore& store) {
  TomModel m;
  m.cfg = cfg;
  m.enc1 = nn::Dense::bind(store, "other.enc.fc1");
  m.enc2 = nn::Dense::bind(store, "other.enc.fc2");
  m.enc_att = nn::Attention::bind(store, "other.enc.att", cfg.d_enc, cfg.d_enc);
  m.gru = nn::GRUCell::bind(store, "tom.gru", 3, cfg.gru_hidden);
  m.gi1 = nn::Dense::bind(store, "tom.gi.fc1");
  m.gi2 = nn::Dense::bind(store, "tom.gi.fc2");
  m.oe1 = nn::Dense::bind(store, "tom.oe.fc1");
  m.oe2 = nn::Dense::bind(store, "tom.oe.fc2");
  m.node_enc = nn::Dense::bind(store, "other.comm.node");
  m.edge_enc = nn::Dense::bind(store, "other.comm.edge");
  m.psi_node = nn::Dense::bind(store, "other.comm.psi_node");
  m.psi_edge = nn::Dense::bind(store, "other.comm.psi_edge");
  m.cls1 = nn::Dense::bind(store, "other.comm.cls1");
  m.cls2 = nn::Dense::bind(store, "other.comm.cls2");
  m.actor1 = nn::Dense::bind(store, "other.actor.fc1");
  m.actor2 = nn::Dense::bind(store, "other.actor.fc2");
  m.critic_in = nn::Dense::bind(store, "other.critic.in");
  m.critic_att = nn::Attention::bind(store, "other.critic.att", cfg.critic_hidden, cfg.critic_hidden);
  m.critic_out = nn::Dense::bind(store, "other.critic.out");
  return m;
}

Tensor TomModel::encode(const Tensor& rows, const std::vector<std::uint8_t>& mask) const {
  Tensor h = tanh_op(enc1.forward(rows));
  h = tanh_op(enc2.forward(h));
  // Masked rows must stay zero through the MLP (biases would leak otherwise).
  std::vector<double> rm(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) rm[i] = mask[i] ? 1.0 : 0.0;
  h = mul_colvec(h, Tensor::values({static_cast<int>(mask.size())}, rm));
  return enc_att.encode(h, &mask);
}

Tensor TomModel::tom_estimate(const Tensor& pose_rel, const Tensor& hidden) const {
  return gru.forward(pose_rel, hidden);
}

namespace {

Tensor head_logits(const nn::Dense& fc1, const nn::Dense& fc2, const Tensor& E,
                   const Tensor& eps) {
  const int m = E.shape()[0];
  std::vector<Tensor> eps_rows(m, eps);
  const Tensor eps_mat = nn::stack_rows(eps_rows);      // [m, 32]
  const Tensor x = nn::concat_cols(E, eps_mat);         // [m, d+32]
  const Tensor h = tanh_op(fc1.forward(x));
  return nn::reshape(fc2.forward(h), {m});
}

}  // namespace

Tensor TomModel::infer_goal_logits(const Tensor& E, const Tensor& eps) const {
  return head_logits(gi1, gi2, E, eps);
}

Tensor TomModel::infer_relation_logits(const Tensor& E, const Tensor& eps) const {
  return head_logits(oe1, oe2, E, eps);
}

Tensor TomModel::infer_goals(const Tensor& E, const Tensor& eps) const {
  return sigmoid(infer_goal_logits(E, eps));
}

Tensor TomModel::infer_relation(const Tensor& E, const Tensor& eps) const {
  return sigmoid(infer_relation_logits(E, eps));
}

Tensor TomModel::build_node_features(const Tensor& E, const std::vector<Tensor>& eps_rows,
                                     const std::vector<Tensor>& gstar_rows, const Tensor& eps_self,
                                     int self_index) const {
  const int n = static_cast<int>(eps_rows.size()) + 1;
  const int m = E.shape()[0];
  std::vector<Tensor> u;
  u.reserve(n);
  int other = 0;
  for (int j = 0; j < n; ++j) {
    if (j == self_index) {
      u.push_back(nn::concat_cols(nn::sum_axis0(E), eps_self));
      continue;
    }
    std::vector<double> gate(m, 0.0);
    for (int q = 0; q < m; ++q) {
      if (gstar_rows[other].at(q) > cfg.filter_delta) gate[q] = 1.0;
    }
    const Tensor gate_row = Tensor::values({1, m}, gate);
    const Tensor filtered = nn::reshape(nn::matmul(gate_row, E), {cfg.d_enc});
    u.push_back(nn::concat_cols(filtered, eps_rows[other]));
    ++other;
  }
  return nn::stack_rows(u);
}

TomModel::GraphResult TomModel::propagate_graph(const Tensor& u, int rounds) const {
  const int n = u.shape()[0];
  if (n < 2) throw std::invalid_argument("propagate_graph: need at least two agents");
  GraphResult out;
  std::vector<int> senders, receivers;
  for (int s = 0; s < n; ++s) {
    for (int r = 0; r < n; ++r) {
      if (s == r) continue;
      out.pairs.emplace_back(s, r);
      senders.push_back(s);
      receivers.push_back(r);
    }
  }
  const int n_edges = static_cast<int>(out.pairs.size());

  const Tensor us = nn::gather_rows(u, senders);
  const Tensor ur = nn::gather_rows(u, receivers);
  out.edge_init = tanh_op(edge_enc.forward(nn::concat_cols(us, ur)));
  const Tensor V = tanh_op(node_enc.forward(u));

  // Receiver incidence: row j sums the edge effects pointing at j.
  std::vector<double> inc(static_cast<std::size_t>(n) * n_edges, 0.0);
  for (int e = 0; e < n_edges; ++e) {
    inc[static_cast<std::size_t>(receivers[e]) * n_edges + e] = 1.0;
  }
  const Tensor incidence = Tensor::values({n, n_edges}, inc);

  Tensor h_node = V;
  Tensor h_edge = out.edge_init;
  for (int t = 0; t < rounds; ++t) {
    const Tensor agg = nn::matmul(incidence, h_edge);
    h_node = tanh_op(psi_node.forward(nn::concat_cols(nn::concat_cols(V, h_node), agg)));
    const Tensor hs = nn::gather_rows(h_node, senders);
    const Tensor hr = nn::gather_rows(h_node, receivers);
    h_edge = tanh_op(psi_edge.forward(nn::concat_cols(nn::concat_cols(hs, hr), h_edge)));
  }
  out.edge_final = h_edge;
  return out;
}

Tensor TomModel::outgoing_edge_logits(const GraphResult& graph, int sender, int n) const {
  std::vector<int> rows;
  for (int e = 0; e < static_cast<int>(graph.pairs.size()); ++e) {
    if (graph.pairs[e].first == sender) rows.push_back(e);
  }
  if (static_cast<int>(rows.size()) != n - 1) {
    throw std::logic_error("outgoing_edge_logits: unexpected edge count");
  }
  const Tensor feat = nn::concat_cols(nn::gather_rows(graph.edge_init, rows),
                                      nn::gather_rows(graph.edge_final, rows));
  return cls2.forward(tanh_op(cls1.forward(feat)));
}

Tensor TomModel::actor_logits(const Tensor& eta) const {
  const int m = eta.shape()[0];
  return nn::reshape(actor2.forward(tanh_op(actor1.forward(eta))), {m});
}

Tensor TomModel::critic_value(const std::vector<Tensor>& etas) const {
  if (etas.empty()) throw std::invalid_argument("critic_value: no agent features");
  std::vector<Tensor> pooled;
  pooled.reserve(etas.size());
  for (const auto& eta : etas) pooled.push_back(nn::mean_axis0(eta));
  const Tensor P = nn::stack_rows(pooled);

  // Canonical agent order so the value is independent of labeling.
  const int n = P.shape()[0];
  const int c = P.shape()[1];
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  const auto& vals = P.data();
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
    for (int j = 0; j < c; ++j) {
      const double va = vals[static_cast<std::size_t>(a) * c + j];
      const double vb = vals[static_cast<std::size_t>(b) * c + j];
      if (va != vb) return va < vb;
    }
    return false;
  });

  const Tensor x = tanh_op(critic_in.forward(nn::gather_rows(P, perm)));
  const Tensor att = critic_att.encode(x);
  return critic_out.forward(nn::mean_axis0(att));
}

std::array<double, 3> egocentric_pose(const Pose2D& observer, const Pose2D& other) {
  const double dx = other.x - observer.x;
  const double dy = other.y - observer.y;
  const double c = std::cos(observer.yaw);
  const double s = std::sin(observer.yaw);
  return {c * dx + s * dy, -s * dx + c * dy, normalize_angle(other.yaw - observer.yaw)};
}

DecisionInputs DecisionInputs::capture(const Env& env) {
  DecisionInputs in;
  const int n = env.n_agents();
  for (int i = 0; i < n; ++i) {
    const auto rows = env.target_rows(i);
    std::vector<double> flat;
    flat.reserve(rows.size() * 4);
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    in.rows.push_back(std::move(flat));
    in.masks.push_back(env.target_mask(i));
    in.poses.push_back(env.agent_pose(i));
  }
  return in;
}

namespace {

struct BernoulliOut {
  Tensor logprob;
  Tensor entropy;
};

// Stable Bernoulli log-mass and entropy from logits:
// log p = -softplus(-z), log(1-p) = -softplus(z).
BernoulliOut bernoulli_terms(const Tensor& z, const std::vector<int>& goal,
                             const std::vector<std::uint8_t>& mask) {
  const int m = static_cast<int>(goal.size());
  std::vector<double> gv(m), mv(m);
  for (int q = 0; q < m; ++q) {
    gv[q] = static_cast<double>(goal[q]);
    mv[q] = mask[q] ? 1.0 : 0.0;
  }
  const Tensor g = Tensor::values({m}, gv);
  const Tensor vis = Tensor::values({m}, mv);
  const Tensor log_p = nn::neg(nn::softplus(nn::neg(z)));
  const Tensor log_1p = nn::neg(nn::softplus(z));
  const Tensor one_minus_g = nn::add_scalar(nn::neg(g), 1.0);
  BernoulliOut out;
  out.logprob =
      nn::sum_all(nn::mul(vis, nn::add(nn::mul(g, log_p), nn::mul(one_minus_g, log_1p))));
  const Tensor p = sigmoid(z);
  const Tensor one_minus_p = nn::add_scalar(nn::neg(p), 1.0);
  out.entropy = nn::neg(
      nn::sum_all(nn::mul(vis, nn::add(nn::mul(p, log_p), nn::mul(one_minus_p, log_1p)))));
  return out;
}

}  // namespace

TeamPipeline::TeamPipeline(const TomModel* model, int n_agents, int m_targets,
                           double pose_mask_radius)
    : model_(model), n_(n_agents), m_(m_targets), pose_mask_radius_(pose_mask_radius) {
  reset();
}

void TeamPipeline::reset() {
  hidden_.assign(n_, std::vector<Tensor>(n_));
  for (auto& row : hidden_) {
    for (auto& h : row) h = Tensor::zeros({model_->cfg.gru_hidden});
  }
}

TeamDecision TeamPipeline::decide(const DecisionInputs& in, GradFlow flow, bool deterministic,
                                  Rng* sample_rng, const StepNoise* replay, bool with_critic,
                                  bool both_modes, StepNoise* record) {
  const int n = n_;
  const int m = m_;
  if (static_cast<int>(in.rows.size()) != n || static_cast<int>(in.poses.size()) != n) {
    throw std::invalid_argument("decide: input size mismatch");
  }
  std::optional<nn::NoGradGuard> ambient;
  if (flow == GradFlow::None) ambient.emplace();

  TeamDecision out;
  out.agents.resize(n);
  if (record) {
    record->edge_gumbel.assign(n, {});
    record->goals.assign(n, {});
  }

  // Pose masking: agents outside the visibility radius are invisible to the
  // belief nets and unreachable by messages.
  std::vector<std::vector<std::uint8_t>> pose_ok(n, std::vector<std::uint8_t>(n, 1));
  if (std::isfinite(pose_mask_radius_)) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double d = std::hypot(in.poses[j].x - in.poses[i].x, in.poses[j].y - in.poses[i].y);
        pose_ok[i][j] = d <= pose_mask_radius_ ? 1 : 0;
      }
    }
  }

  // Observation encoders.
  std::vector<Tensor> E(n);
  {
    std::optional<nn::NoGradGuard> guard;
    if (flow == GradFlow::Belief || flow == GradFlow::Comm) guard.emplace();
    for (int i = 0; i < n; ++i) {
      E[i] = model_->encode(Tensor::values({m, 4}, in.rows[i]), in.masks[i]);
    }
  }

  // Belief updates (recurrent across decisions of one episode).
  std::vector<std::vector<Tensor>> eps(n);        // per agent, other rows (j ascending)
  std::vector<Tensor> eps_self(n);
  {
    std::optional<nn::NoGradGuard> guard;
    if (flow != GradFlow::Belief) guard.emplace();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const bool self = (i == j);
        Tensor eps_ij;
        if (!self && !pose_ok[i][j]) {
          eps_ij = Tensor::zeros({model_->cfg.gru_hidden});
        } else {
          const auto rel = self ? std::array<double, 3>{0.0, 0.0, 0.0}
                                : egocentric_pose(in.poses[i], in.poses[j]);
          const Tensor x = Tensor::values({3}, {rel[0], rel[1], rel[2]});
          eps_ij = model_->tom_estimate(x, hidden_[i][j]);
          hidden_[i][j] = eps_ij;
        }
        if (self) eps_self[i] = eps_ij;
        else eps[i].push_back(eps_ij);
      }
    }
    for (int i = 0; i < n; ++i) {
      auto& a = out.agents[i];
      std::vector<Tensor> g_rows, c_rows, gz_rows, cz_rows;
      a.tom_row_ok.clear();
      int other = 0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        a.tom_row_ok.push_back(pose_ok[i][j]);
        if (!pose_ok[i][j]) {
          g_rows.push_back(Tensor::zeros({m}));
          c_rows.push_back(Tensor::zeros({m}));
          gz_rows.push_back(Tensor::zeros({m}));
          cz_rows.push_back(Tensor::zeros({m}));
        } else {
          const Tensor gz = model_->infer_goal_logits(E[i], eps[i][other]);
          const Tensor cz = model_->infer_relation_logits(E[i], eps[i][other]);
          gz_rows.push_back(gz);
          cz_rows.push_back(cz);
          g_rows.push_back(sigmoid(gz));
          c_rows.push_back(sigmoid(cz));
        }
        ++other;
      }
      if (n > 1) {
        a.gstar = nn::stack_rows(g_rows);
        a.cstar = nn::stack_rows(c_rows);
        a.gstar_logits = nn::stack_rows(gz_rows);
        a.cstar_logits = nn::stack_rows(cz_rows);
      }
    }
  }
  if (flow == GradFlow::Belief) {
    // Supervised belief learning needs nothing past the prediction heads.
    return out;
  }

  // Message sender: local graphs, edge logits, sampled connections.
  // Differentiable in Policy and Comm flow (inputs are detached constants in
  // Comm, so only the sender's own parameters receive gradients there).
  std::vector<Tensor> edge_logits(n);
  if (n > 1) {
    for (int i = 0; i < n; ++i) {
      std::vector<Tensor> g_rows;
      for (int r = 0; r < n - 1; ++r) g_rows.push_back(nn::row(out.agents[i].gstar, r));
      const Tensor u = model_->build_node_features(E[i], eps[i], g_rows, eps_self[i], i);
      const auto graph = model_->propagate_graph(u, model_->cfg.propagation_rounds);
      edge_logits[i] = model_->outgoing_edge_logits(graph, i, n);
      out.agents[i].edge_logits = edge_logits[i];
    }
  }

  // Connection sampling; the straight-through gate carries gradient through
  // retained-or-cut decisions in Policy flow.
  std::vector<std::vector<Tensor>> gates(n);  // per agent, per outgoing edge scalar
  for (int i = 0; i < n; ++i) {
    auto& a = out.agents[i];
    a.retained.assign(n - 1, 0);
    a.forced_cut.assign(n - 1, 0);
    a.p_retain.assign(n - 1, 0.0);
    gates[i].resize(n > 1 ? n - 1 : 0);
    if (n == 1) continue;
    const Tensor probs = nn::softmax_rows(edge_logits[i]);
    int other = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      a.p_retain[other] = probs.at(static_cast<std::size_t>(other) * 2 + 1);
      // Noise slots stay positional (two per candidate edge) so replay lines
      // up even when some edges are forced or chosen greedily.
      std::vector<double> noise{0.0, 0.0};
      if (!pose_ok[i][j]) {
        a.forced_cut[other] = 1;
        a.retained[other] = 0;
      } else if (deterministic) {
        a.retained[other] = a.p_retain[other] > probs.at(static_cast<std::size_t>(other) * 2) ? 1 : 0;
        if (a.retained[other]) gates[i][other] = Tensor::scalar(1.0);
      } else {
        if (replay) {
          noise[0] = replay->edge_gumbel[i][2 * other];
          noise[1] = replay->edge_gumbel[i][2 * other + 1];
        } else {
          noise[0] = sample_rng->gumbel();
          noise[1] = sample_rng->gumbel();
        }
        const Tensor logits_row = nn::row(edge_logits[i], other);
        const auto sample =
            nn::gumbel_softmax_sample(logits_row, model_->cfg.gumbel_temperature, noise);
        a.retained[other] = sample.index == 1 ? 1 : 0;
        gates[i][other] = nn::element(sample.onehot, 1);
      }
      if (record) {
        record->edge_gumbel[i].push_back(noise[0]);
        record->edge_gumbel[i].push_back(noise[1]);
      }
      ++other;
    }
  }

  // Exchange: a retained edge i->j delivers the sender's inferred goals for j.
  std::vector<Tensor> msg_sum(n);
  for (int r = 0; r < n; ++r) msg_sum[r] = Tensor::zeros({m});
  for (int s = 0; s < n; ++s) {
    int other = 0;
    for (int r = 0; r < n; ++r) {
      if (r == s) continue;
      const auto& a = out.agents[s];
      if (!a.forced_cut[other] && gates[s][other].defined()) {
        const Tensor message = nn::row(a.gstar, other);
        msg_sum[r] = nn::add(msg_sum[r], nn::mul_vecscalar(message, gates[s][other]));
        if (a.retained[other]) out.comm_edges.emplace_back(s, r);
      }
      ++other;
    }
  }

  // Decision per agent.
  const bool one_choice = model_->cfg.task == "coopnav";
  std::vector<Tensor> etas(n);
  for (int i = 0; i < n; ++i) {
    auto& a = out.agents[i];
    const Tensor inferred_max =
        n > 1 ? nn::max_axis0(a.gstar) : Tensor::zeros({m});
    const Tensor eta = nn::concat_cols(nn::concat_cols(E[i], nn::reshape(inferred_max, {m, 1})),
                                       nn::reshape(msg_sum[i], {m, 1}));
    etas[i] = eta;
    const Tensor z = model_->actor_logits(eta);
    const auto& mask = in.masks[i];
    std::vector<double> mv(m);
    int n_visible = 0;
    for (int q = 0; q < m; ++q) {
      mv[q] = mask[q] ? 1.0 : 0.0;
      n_visible += mask[q] ? 1 : 0;
    }

    if (both_modes) {
      nn::NoGradGuard ng;
      const Tensor eta0 = nn::concat_cols(
          nn::concat_cols(E[i].detach(), nn::reshape(inferred_max.detach(), {m, 1})),
          nn::reshape(Tensor::zeros({m}), {m, 1}));
      const Tensor z0 = model_->actor_logits(eta0);
      if (one_choice) {
        std::vector<double> inv(m);
        for (int q = 0; q < m; ++q) inv[q] = mask[q] ? 0.0 : 1.0;
        a.probs_nomsg = nn::softmax_rows(nn::masked_fill(z0, inv, -1e30)).data();
      } else {
        a.probs_nomsg = mul(sigmoid(z0), Tensor::values({m}, mv)).data();
      }
    }

    a.goal.assign(m, 0);
    if (n_visible == 0) {
      a.probs.assign(m, 0.0);
      a.logprob = Tensor::scalar(0.0);
      a.entropy = Tensor::scalar(0.0);
      a.goal_index = one_choice ? 0 : -1;
      if (record) record->goals[i] = a.goal;
      continue;
    }

    if (one_choice) {
      std::vector<double> inv(m);
      for (int q = 0; q < m; ++q) inv[q] = mask[q] ? 0.0 : 1.0;
      const Tensor zm = nn::masked_fill(z, inv, -1e30);
      const Tensor logp = nn::log_softmax_rows(zm);
      const Tensor p = nn::exp_op(logp);
      a.probs = p.data();
      int choice;
      if (replay) {
        choice = 0;
        for (int q = 0; q < m; ++q) {
          if (replay->goals[i][q]) choice = q;
        }
      } else if (deterministic) {
        choice = 0;
        for (int q = 1; q < m; ++q) {
          if (a.probs[q] > a.probs[choice]) choice = q;
        }
      } else {
        const double u = sample_rng->uniform();
        double acc = 0.0;
        choice = 0;
        for (int q = 0; q < m; ++q) {
          if (!mask[q]) continue;
          acc += a.probs[q];
          choice = q;
          if (u < acc) break;
        }
      }
      a.goal[choice] = 1;
      a.goal_index = choice;
      a.logprob = nn::element(logp, choice);
      a.entropy = nn::neg(nn::sum_all(nn::mul(p, logp)));
    } else {
      const Tensor p = mul(sigmoid(z), Tensor::values({m}, mv));
      a.probs = p.data();
      if (replay) {
        a.goal = replay->goals[i];
      } else if (deterministic) {
        for (int q = 0; q < m; ++q) a.goal[q] = a.probs[q] > 0.5 ? 1 : 0;
      } else {
        for (int q = 0; q < m; ++q) {
          const double u = sample_rng->uniform();
          if (mask[q]) a.goal[q] = u < a.probs[q] ? 1 : 0;
        }
      }
      const auto terms = bernoulli_terms(z, a.goal, mask);
      a.logprob = terms.logprob;
      a.entropy = terms.entropy;
    }
    if (record) record->goals[i] = a.goal;
  }

  if (with_critic) out.value = model_->critic_value(etas);
  return out;
}

int executor_msmtc(const std::vector<std::array<double, 4>>& rows,
                   const std::vector<std::uint8_t>& mask, const std::vector<int>& goal) {
  std::vector<double> bearings;
  for (std::size_t q = 0; q < goal.size(); ++q) {
    if (goal[q] && mask[q]) bearings.push_back(rows[q][3]);
  }
  if (bearings.empty()) return static_cast<int>(MsmtcAction::Stay);

  double mid;
  if (bearings.size() == 1) {
    mid = bearings[0];
  } else {
    // Midpoint of the minimal arc containing all chosen bearings: drop the
    // largest circular gap, span the rest.
    std::sort(bearings.begin(), bearings.end());
    const int k = static_cast<int>(bearings.size());
    int widest = k - 1;
    double widest_gap = bearings[0] + 2.0 * kPi - bearings[k - 1];
    for (int i = 0; i + 1 < k; ++i) {
      const double gap = bearings[i + 1] - bearings[i];
      if (gap > widest_gap) {
        widest_gap = gap;
        widest = i;
      }
    }
    const double start = bearings[(widest + 1) % k];
    const double width = 2.0 * kPi - widest_gap;
    mid = normalize_angle(start + width / 2.0);
  }

  constexpr double kDeadband = kPi / 72.0;  // 2.5 degrees
  if (std::abs(mid) <= kDeadband) return static_cast<int>(MsmtcAction::Stay);
  return mid > 0.0 ? static_cast<int>(MsmtcAction::RotLeft)
                   : static_cast<int>(MsmtcAction::RotRight);
}

int executor_cn(const std::vector<std::array<double, 4>>& rows, int goal_index) {
  const double dx = rows.at(goal_index)[2];
  const double dy = rows.at(goal_index)[3];
  if (std::abs(dx) >= std::abs(dy)) {
    return static_cast<int>(dx >= 0.0 ? CnAction::Right : CnAction::Left);
  }
  return static_cast<int>(dy >= 0.0 ? CnAction::Up : CnAction::Down);
}

}  // namespace toma
