#include "toma/evaluate.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "toma/coopnav_env.hpp"
#include "toma/heuristic.hpp"
#include "toma/msmtc_env.hpp"
#include "toma/replay.hpp"

namespace toma {

namespace {

struct MeanStd {
  double mean = 0.0;
  double sd = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - r.mean) * (x - r.mean);
  r.sd = std::sqrt(var / static_cast<double>(xs.size()));
  return r;
}

std::vector<int> run_executors(const Env& env, const std::string& task,
                               const std::vector<std::vector<int>>& goals,
                               const std::vector<int>& goal_index) {
  const int n = env.n_agents();
  std::vector<int> actions(n, 0);
  for (int i = 0; i < n; ++i) {
    const auto rows = env.target_rows(i);
    if (task == "coopnav") {
      actions[i] = executor_cn(rows, goal_index[i]);
    } else {
      actions[i] = executor_msmtc(rows, env.target_mask(i), goals[i]);
    }
  }
  return actions;
}

}  // namespace

void EvalReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "episodes,mean_reward,std_reward,mean_metric,std_metric,mean_edges,std_edges,"
         "mean_bandwidth,std_bandwidth,tom_gi_acc,tom_oe_acc\n";
  out << episodes << "," << mean_reward << "," << std_reward << "," << mean_metric << ","
      << std_metric << "," << mean_edges << "," << std_edges << "," << mean_bandwidth << ","
      << std_bandwidth << ",";
  if (has_tom_acc) out << tom_gi_acc << "," << tom_oe_acc;
  else out << "nan,nan";
  out << "\n";
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "episodes:       " << episodes << "\n";
  os << "reward:         " << mean_reward << " +- " << std_reward << "\n";
  os << "task metric:    " << mean_metric << " +- " << std_metric << "\n";
  os << "comm edges:     " << mean_edges << " +- " << std_edges << "\n";
  os << "comm bandwidth: " << mean_bandwidth << " +- " << std_bandwidth << "\n";
  if (has_tom_acc) {
    os << "goal-inference accuracy:  " << tom_gi_acc << "\n";
    os << "relation-estimate accuracy: " << tom_oe_acc << "\n";
  }
  return os.str();
}

TomPolicy::TomPolicy(const TomModel* model, bool greedy, double pose_mask_radius)
    : model_(model), greedy_(greedy), pose_mask_radius_(pose_mask_radius) {}

void TomPolicy::begin_episode(const Env& env) {
  pipeline_ = std::make_unique<TeamPipeline>(model_, env.n_agents(), env.n_targets(),
                                             pose_mask_radius_);
  goals_.assign(env.n_agents(), std::vector<int>(env.n_targets(), 0));
  goal_index_.assign(env.n_agents(), 0);
}

std::vector<int> TomPolicy::act(const Env& env, Rng& rng) {
  trace_ = StepTrace{};
  const int n = env.n_agents();
  const int K = env.config().high_level_period;
  if (env.step_count() % K == 0) {
    const auto in = DecisionInputs::capture(env);
    const auto team = pipeline_->decide(in, GradFlow::None, greedy_, &rng, nullptr,
                                        /*with_critic=*/false, /*both_modes=*/false);
    trace_.decided = true;
    trace_.comm = team.comm_edges;
    for (int i = 0; i < n; ++i) {
      goals_[i] = team.agents[i].goal;
      goal_index_[i] = team.agents[i].goal_index;
    }
    // Belief accuracy against the live episode: goals of others and true
    // relation fields are the labels.
    if (n > 1) {
      for (int i = 0; i < n; ++i) {
        const auto& a = team.agents[i];
        int other = 0;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const auto labels_c = env.relation_labels(j);
          for (int q = 0; q < env.n_targets(); ++q) {
            const double gp = a.gstar.at(static_cast<std::size_t>(other) * env.n_targets() + q);
            const double cp = a.cstar.at(static_cast<std::size_t>(other) * env.n_targets() + q);
            trace_.gi_total++;
            trace_.gi_correct += ((gp > 0.5 ? 1 : 0) == goals_[j][q]) ? 1 : 0;
            trace_.oe_total++;
            trace_.oe_correct += ((cp > 0.5 ? 1 : 0) == labels_c[q]) ? 1 : 0;
          }
          ++other;
        }
      }
    }
  }
  return run_executors(env, env.config().task, goals_, goal_index_);
}

void HeuristicPolicy::begin_episode(const Env& env) {
  if (env.config().task != "msmtc") {
    throw std::invalid_argument("heuristic policy only applies to the coverage task");
  }
}

std::vector<int> HeuristicPolicy::act(const Env& env, Rng& rng) {
  (void)rng;
  trace_ = StepTrace{};
  const auto* msmtc = dynamic_cast<const MsmtcEnv*>(&env);
  if (!msmtc) throw std::invalid_argument("heuristic policy needs the coverage environment");
  return heuristic_action(msmtc->state(), env.config());
}

void RandomGoalPolicy::begin_episode(const Env& env) {
  goals_.assign(env.n_agents(), std::vector<int>(env.n_targets(), 0));
  goal_index_.assign(env.n_agents(), 0);
}

std::vector<int> RandomGoalPolicy::act(const Env& env, Rng& rng) {
  trace_ = StepTrace{};
  const int n = env.n_agents();
  const int m = env.n_targets();
  if (env.step_count() % env.config().high_level_period == 0) {
    trace_.decided = true;
    for (int i = 0; i < n; ++i) {
      const auto mask = env.target_mask(i);
      goals_[i].assign(m, 0);
      if (env.config().task == "coopnav") {
        std::vector<int> vis;
        for (int q = 0; q < m; ++q) {
          if (mask[q]) vis.push_back(q);
        }
        goal_index_[i] = vis.empty() ? 0 : vis[rng.uniform_int(static_cast<int>(vis.size()))];
        goals_[i][goal_index_[i]] = 1;
      } else {
        for (int q = 0; q < m; ++q) {
          if (mask[q] && rng.bernoulli(0.5)) goals_[i][q] = 1;
        }
      }
    }
  }
  return run_executors(env, env.config().task, goals_, goal_index_);
}

EvalReport eval_policy(Policy& policy, const EnvConfig& cfg, const EvalOptions& opt) {
  if (opt.episodes <= 0) throw std::invalid_argument("eval: episodes must be positive");
  std::vector<double> ep_reward, ep_metric, ep_edges, ep_bandwidth;
  long long gi_c = 0, gi_t = 0, oe_c = 0, oe_t = 0;
  if (!opt.replay_dir.empty()) std::filesystem::create_directories(opt.replay_dir);

  for (int e = 0; e < opt.episodes; ++e) {
    auto env = make_env(cfg);
    env->reset(opt.seed + static_cast<std::uint64_t>(e));
    Rng rng(opt.seed * 7919 + static_cast<std::uint64_t>(e));
    policy.begin_episode(*env);

    std::ofstream replay_out;
    std::unique_ptr<ReplayWriter> writer;
    if (!opt.replay_dir.empty()) {
      std::ostringstream name;
      name << opt.replay_dir << "/episode_" << e << ".replay";
      replay_out.open(name.str());
      writer = std::make_unique<ReplayWriter>(replay_out, *env);
    }

    double reward_sum = 0.0, metric_sum = 0.0;
    long long edges = 0;
    int decisions = 0;
    int steps = 0;
    bool done = false;
    while (!done) {
      const auto actions = policy.act(*env, rng);
      const auto& tr = policy.trace();
      if (tr.decided) {
        ++decisions;
        edges += static_cast<long long>(tr.comm.size());
        gi_c += tr.gi_correct;
        gi_t += tr.gi_total;
        oe_c += tr.oe_correct;
        oe_t += tr.oe_total;
      }
      const auto res = env->step(actions);
      reward_sum += res.team_reward;
      metric_sum += env->task_metric();
      ++steps;
      done = res.done;
      if (writer) writer->add_step(*env, res.team_reward, tr.comm);
    }
    ep_reward.push_back(reward_sum / steps);
    ep_metric.push_back(metric_sum / steps);
    const double mean_edges = decisions > 0 ? static_cast<double>(edges) / decisions : 0.0;
    ep_edges.push_back(mean_edges);
    ep_bandwidth.push_back(mean_edges * cfg.m_targets);
  }

  EvalReport rep;
  rep.episodes = opt.episodes;
  const auto r = mean_std(ep_reward);
  rep.mean_reward = r.mean;
  rep.std_reward = r.sd;
  const auto m = mean_std(ep_metric);
  rep.mean_metric = m.mean;
  rep.std_metric = m.sd;
  const auto ed = mean_std(ep_edges);
  rep.mean_edges = ed.mean;
  rep.std_edges = ed.sd;
  const auto bw = mean_std(ep_bandwidth);
  rep.mean_bandwidth = bw.mean;
  rep.std_bandwidth = bw.sd;
  if (policy.reports_tom_accuracy() && gi_t > 0) {
    rep.has_tom_acc = true;
    rep.tom_gi_acc = static_cast<double>(gi_c) / gi_t;
    rep.tom_oe_acc = static_cast<double>(oe_c) / oe_t;
  }
  return rep;
}

std::pair<double, double> tom_accuracy(const std::vector<double>& gstar,
                                       const std::vector<std::uint8_t>& goal_labels,
                                       const std::vector<double>& cstar,
                                       const std::vector<std::uint8_t>& relation_labels,
                                       double delta) {
  if (gstar.size() != goal_labels.size() || cstar.size() != relation_labels.size()) {
    throw std::invalid_argument("tom_accuracy: prediction/label shape mismatch");
  }
  long long gc = 0, oc = 0;
  for (std::size_t i = 0; i < gstar.size(); ++i) {
    gc += ((gstar[i] > delta ? 1 : 0) == goal_labels[i]) ? 1 : 0;
  }
  for (std::size_t i = 0; i < cstar.size(); ++i) {
    oc += ((cstar[i] > delta ? 1 : 0) == relation_labels[i]) ? 1 : 0;
  }
  const double gi = gstar.empty() ? 0.0 : static_cast<double>(gc) / gstar.size();
  const double oe = cstar.empty() ? 0.0 : static_cast<double>(oc) / cstar.size();
  return {gi, oe};
}

GridResult scalability_grid(const TomModel& model, const EnvConfig& base,
                            const std::vector<int>& agent_counts,
                            const std::vector<int>& target_counts, int episodes,
                            std::uint64_t seed) {
  if (agent_counts.empty() || target_counts.empty()) {
    throw std::invalid_argument("scalability_grid: empty range");
  }
  for (int p : agent_counts) {
    if (p > 12) throw std::invalid_argument("scalability_grid: team too large for the search baseline");
  }
  GridResult grid;
  grid.agent_counts = agent_counts;
  grid.target_counts = target_counts;
  for (int p : agent_counts) {
    for (int q : target_counts) {
      EnvConfig cfg = base;
      cfg.n_agents = p;
      cfg.m_targets = q;
      EvalOptions opt;
      opt.episodes = episodes;
      opt.seed = seed;
      TomPolicy tom(&model, /*greedy=*/true, cfg.pose_visibility_radius);
      const double c_tom = eval_policy(tom, cfg, opt).mean_metric;
      HeuristicPolicy hs;
      const double c_hs = eval_policy(hs, cfg, opt).mean_metric;
      grid.ratios.push_back(c_hs > 0.0 ? c_tom / c_hs : 0.0);
    }
  }
  return grid;
}

void write_grid_csv(const GridResult& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write grid: " + path);
  out << "agents\\targets";
  for (int q : grid.target_counts) out << "," << q;
  out << "\n";
  for (std::size_t i = 0; i < grid.agent_counts.size(); ++i) {
    out << grid.agent_counts[i];
    for (std::size_t j = 0; j < grid.target_counts.size(); ++j) {
      out << "," << grid.ratios[i * grid.target_counts.size() + j];
    }
    out << "\n";
  }
}

}  // namespace toma
