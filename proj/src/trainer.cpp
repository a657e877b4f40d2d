#include "toma/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "toma/manifest.hpp"
#include "toma/version.hpp"

namespace toma {

using nn::Tensor;

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid train config: " + msg); };
  if (max_steps < 0) fail("max_steps must be nonnegative");
  if (workers <= 0) fail("workers must be positive");
  if (update_every <= 0) fail("update_every must be positive");
  if (entropy_weight < 0.0) fail("entropy_weight must be nonnegative");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (tom_freeze <= 0) fail("tom_freeze must be positive");
  if (!(gamma_rate > 0.0)) fail("gamma_rate must be positive");
  if (warmup_episodes < 0) fail("warmup_episodes must be nonnegative");
  if (!(gamma0 > 0.0) || gamma0 > 0.9) fail("gamma0 must be in (0, 0.9]");
  if (episode_len0 <= 0) fail("episode_len0 must be positive");
  if (!(cr_threshold > 0.0)) fail("cr_threshold must be positive");
  if (cr_updates < 0) fail("cr_updates must be nonnegative");
  if (checkpoint_every <= 0) fail("checkpoint_every must be positive");
}

namespace {

TrainConfig train_from_reader(TrainConfig cfg, KvReader& r) {
  cfg.max_steps = r.get_int("max_steps", cfg.max_steps);
  cfg.workers = static_cast<int>(r.get_int("workers", cfg.workers));
  cfg.update_every = static_cast<int>(r.get_int("update_every", cfg.update_every));
  cfg.entropy_weight = r.get_double("entropy_weight", cfg.entropy_weight);
  cfg.lr = r.get_double("lr", cfg.lr);
  cfg.tom_freeze = static_cast<int>(r.get_int("tom_freeze", cfg.tom_freeze));
  cfg.gamma_rate = r.get_double("gamma_rate", cfg.gamma_rate);
  cfg.warmup_episodes = r.get_int("warmup_episodes", cfg.warmup_episodes);
  cfg.gamma0 = r.get_double("gamma0", cfg.gamma0);
  cfg.episode_len0 = static_cast<int>(r.get_int("episode_len0", cfg.episode_len0));
  cfg.cr_threshold = r.get_double("cr_threshold", cfg.cr_threshold);
  cfg.cr_updates = static_cast<int>(r.get_int("cr_updates", cfg.cr_updates));
  cfg.checkpoint_every = r.get_int("checkpoint_every", cfg.checkpoint_every);
  cfg.seed = static_cast<std::uint64_t>(r.get_int("seed", static_cast<long long>(cfg.seed)));
  return cfg;
}

RunConfig run_from_entries(RunConfig cfg, const std::vector<KvEntry>& entries) {
  // Split entries between the env and train readers; both must account for
  // every key, so unknown keys still fail.
  KvReader r(entries);
  cfg.train = train_from_reader(cfg.train, r);
  std::vector<KvEntry> env_entries;
  for (const auto& e : entries) {
    static const char* train_keys[] = {"max_steps", "workers", "update_every", "entropy_weight",
                                       "lr", "tom_freeze", "gamma_rate", "warmup_episodes",
                                       "gamma0", "episode_len0", "cr_threshold", "cr_updates",
                                       "checkpoint_every", "seed"};
    bool is_train = false;
    for (const char* k : train_keys) is_train = is_train || e.key == k;
    if (!is_train) env_entries.push_back(e);
  }
  cfg.env = apply_env_overrides(cfg.env, env_entries);
  cfg.train.validate();
  return cfg;
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  std::uint64_t x = a * 0x9e3779b97f4a7c15ULL + b;
  x ^= x >> 29;
  x = x * 0xbf58476d1ce4e5b9ULL + c;
  x ^= x >> 32;
  x = x * 0x94d049bb133111ebULL + d;
  return x ^ (x >> 31);
}

}  // namespace

RunConfig run_config_from_entries(const std::vector<KvEntry>& entries) {
  return run_from_entries(RunConfig{}, entries);
}

RunConfig load_run_config(const std::string& path) {
  return run_from_entries(RunConfig{}, parse_kv_file(path));
}

RunConfig apply_run_overrides(RunConfig cfg, const std::vector<KvEntry>& overrides) {
  return run_from_entries(std::move(cfg), overrides);
}

int curriculum_episode_len(double gamma) {
  const int len = static_cast<int>(std::floor(5.0 * gamma + 0.5)) * 20;
  return std::min(len, 100);
}

Curriculum curriculum_tick(double gamma, const TrainConfig& cfg) {
  Curriculum c;
  c.gamma = std::min(gamma * (1.0 + cfg.gamma_rate), 0.9);
  c.episode_len = curriculum_episode_len(c.gamma);
  return c;
}

double RolloutBatch::mean_reward() const {
  double acc = 0.0;
  for (const auto& e : episodes) acc += e.mean_reward;
  return episodes.empty() ? 0.0 : acc / episodes.size();
}

double RolloutBatch::mean_metric() const {
  double acc = 0.0;
  for (const auto& e : episodes) acc += e.mean_metric;
  return episodes.empty() ? 0.0 : acc / episodes.size();
}

long long RolloutBatch::decision_count() const {
  long long acc = 0;
  for (const auto& e : episodes) acc += static_cast<long long>(e.steps.size());
  return acc;
}

double RolloutBatch::mean_edges_per_decision() const {
  long long edges = 0;
  for (const auto& e : episodes) edges += e.comm_edges;
  const long long d = decision_count();
  return d > 0 ? static_cast<double>(edges) / d : 0.0;
}

namespace {

EpisodeData run_episode(const EnvConfig& env_cfg, const TomModel& model, std::uint64_t env_seed,
                        std::uint64_t sample_seed, int episode_len, bool both_modes) {
  EnvConfig cfg = env_cfg;
  cfg.episode_length = episode_len;
  auto env = make_env(cfg);
  env->reset(env_seed);
  Rng rng(sample_seed);
  TeamPipeline pipeline(&model, env->n_agents(), env->n_targets(), cfg.pose_visibility_radius);

  EpisodeData ep;
  const int n = env->n_agents();
  double reward_total = 0.0, metric_total = 0.0;
  bool done = false;
  while (!done) {
    HighLevelStep hl;
    hl.inputs = DecisionInputs::capture(*env);
    for (int j = 0; j < n; ++j) hl.relation_labels.push_back(env->relation_labels(j));
    const auto team = pipeline.decide(hl.inputs, GradFlow::None, /*deterministic=*/false, &rng,
                                      nullptr, /*with_critic=*/false, both_modes, &hl.noise);
    ep.comm_edges += static_cast<long long>(team.comm_edges.size());
    std::vector<std::vector<int>> goals(n);
    std::vector<int> goal_index(n, 0);
    for (int i = 0; i < n; ++i) {
      goals[i] = team.agents[i].goal;
      goal_index[i] = team.agents[i].goal_index;
      hl.retained.push_back(team.agents[i].retained);
      hl.forced.push_back(team.agents[i].forced_cut);
      hl.probs_with.push_back(team.agents[i].probs);
      if (both_modes) hl.probs_nomsg.push_back(team.agents[i].probs_nomsg);
    }

    for (int k = 0; k < cfg.high_level_period && !done; ++k) {
      std::vector<int> actions(n, 0);
      for (int i = 0; i < n; ++i) {
        if (cfg.task == "coopnav") {
          actions[i] = executor_cn(env->target_rows(i), goal_index[i]);
        } else {
          actions[i] = executor_msmtc(env->target_rows(i), env->target_mask(i), goals[i]);
        }
      }
      const auto res = env->step(actions);
      hl.reward += res.team_reward;
      reward_total += res.team_reward;
      metric_total += env->task_metric();
      ++ep.env_steps;
      done = res.done;
    }
    ep.steps.push_back(std::move(hl));
  }

  // Truncation bootstrap: value of the post-terminal state under the same
  // snapshot. Deterministic decide consumes no randomness.
  const auto final_inputs = DecisionInputs::capture(*env);
  const auto final_team = pipeline.decide(final_inputs, GradFlow::None, /*deterministic=*/true,
                                          nullptr, nullptr, /*with_critic=*/true, false);
  ep.bootstrap_value = final_team.value.item();
  ep.mean_reward = reward_total / ep.env_steps;
  ep.mean_metric = metric_total / ep.env_steps;
  return ep;
}

}  // namespace

RolloutBatch collect_rollouts(const EnvConfig& env_cfg, const TomModel& model,
                              const TrainConfig& cfg, int episode_len, std::uint64_t round_index,
                              bool both_modes) {
  const int episodes_per_worker =
      std::max(1, (cfg.update_every + episode_len - 1) / episode_len);
  std::vector<std::vector<EpisodeData>> results(cfg.workers);
  std::vector<std::string> errors(cfg.workers);
  std::vector<std::thread> threads;
  threads.reserve(cfg.workers);
  for (int w = 0; w < cfg.workers; ++w) {
    threads.emplace_back([&, w]() {
      try {
        for (int e = 0; e < episodes_per_worker; ++e) {
          const std::uint64_t env_seed = mix64(cfg.seed, round_index, w, 2 * e);
          const std::uint64_t sample_seed = mix64(cfg.seed, round_index, w, 2 * e + 1);
          results[w].push_back(
              run_episode(env_cfg, model, env_seed, sample_seed, episode_len, both_modes));
        }
      } catch (const std::exception& ex) {
        errors[w] = ex.what();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (int w = 0; w < cfg.workers; ++w) {
    if (!errors[w].empty()) {
      throw std::runtime_error("rollout worker " + std::to_string(w) + ": " + errors[w]);
    }
  }
  RolloutBatch batch;
  batch.pose_mask_radius = env_cfg.pose_visibility_radius;
  for (int w = 0; w < cfg.workers; ++w) {
    for (auto& ep : results[w]) {
      batch.env_steps += ep.env_steps;
      batch.episodes.push_back(std::move(ep));
    }
  }
  return batch;
}

A2CLosses a2c_update(const RolloutBatch& batch, const TomModel& model, nn::ParamStore& store,
                     const nn::AdamOptimizer& opt, const TrainConfig& cfg, double gamma,
                     bool apply) {
  if (batch.episodes.empty()) throw std::invalid_argument("a2c_update: empty batch");
  store.zero_grad();

  Tensor policy_loss = Tensor::scalar(0.0);
  Tensor value_loss = Tensor::scalar(0.0);
  Tensor entropy_sum = Tensor::scalar(0.0);

  for (const auto& ep : batch.episodes) {
    const int n = static_cast<int>(ep.steps.front().inputs.poses.size());
    const int m = static_cast<int>(ep.steps.front().relation_labels.front().size());
    TeamPipeline pipeline(&model, n, m, batch.pose_mask_radius);
    const int T = static_cast<int>(ep.steps.size());
    std::vector<Tensor> values(T);
    std::vector<std::vector<Tensor>> logprobs(T), entropies(T);
    for (int t = 0; t < T; ++t) {
      const auto& hl = ep.steps[t];
      const auto team = pipeline.decide(hl.inputs, GradFlow::Policy, /*deterministic=*/false,
                                        nullptr, &hl.noise, /*with_critic=*/true, false);
      values[t] = team.value;
      for (const auto& a : team.agents) {
        logprobs[t].push_back(a.logprob);
        entropies[t].push_back(a.entropy);
      }
    }
    double ret = ep.bootstrap_value;
    std::vector<double> returns(T);
    for (int t = T - 1; t >= 0; --t) {
      ret = ep.steps[t].reward + gamma * ret;
      returns[t] = ret;
    }
    for (int t = 0; t < T; ++t) {
      const double advantage = returns[t] - values[t].item();
      for (const auto& lp : logprobs[t]) {
        policy_loss = nn::add(policy_loss, nn::scale(lp, -advantage));
      }
      const Tensor delta = nn::add_scalar(nn::neg(values[t]), returns[t]);
      value_loss = nn::add(value_loss, nn::mul(delta, delta));
      for (const auto& h : entropies[t]) entropy_sum = nn::add(entropy_sum, h);
    }
  }

  const Tensor total = nn::sub(nn::add(policy_loss, value_loss),
                               nn::scale(entropy_sum, cfg.entropy_weight));
  nn::backward(total);
  A2CLosses out;
  out.policy = policy_loss.item();
  out.value = value_loss.item();
  out.entropy = entropy_sum.item();
  out.total = total.item();
  if (apply) {
    opt.step(store, kOtherPrefix, cfg.lr);
  } else {
    store.zero_grad();
  }
  return out;
}

TomLosses tom_update(const std::vector<RolloutBatch>& buffered, const TomModel& model,
                     nn::ParamStore& store, const nn::AdamOptimizer& opt, const TrainConfig& cfg,
                     bool apply) {
  long long total_eps = 0;
  for (const auto& b : buffered) total_eps += static_cast<long long>(b.episodes.size());
  if (total_eps == 0) throw std::invalid_argument("tom_update: empty buffer");
  store.zero_grad();

  Tensor gi_sum = Tensor::scalar(0.0);
  Tensor oe_sum = Tensor::scalar(0.0);
  long long n_terms = 0;
  long long gi_correct = 0, oe_correct = 0;

  for (const auto& batch : buffered) {
    for (const auto& ep : batch.episodes) {
      const int n = static_cast<int>(ep.steps.front().inputs.poses.size());
      const int m = static_cast<int>(ep.steps.front().relation_labels.front().size());
      if (n < 2) continue;
      TeamPipeline pipeline(&model, n, m, batch.pose_mask_radius);
      for (const auto& hl : ep.steps) {
        const auto team = pipeline.decide(hl.inputs, GradFlow::Belief, /*deterministic=*/true,
                                          nullptr, nullptr, false, false);
        for (int i = 0; i < n; ++i) {
          const auto& a = team.agents[i];
          std::vector<double> glabels, clabels, weights;
          glabels.reserve(static_cast<std::size_t>(n - 1) * m);
          int other = 0;
          for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double w = a.tom_row_ok[other] ? 1.0 : 0.0;
            for (int q = 0; q < m; ++q) {
              glabels.push_back(static_cast<double>(hl.noise.goals[j][q]));
              clabels.push_back(static_cast<double>(hl.relation_labels[j][q]));
              weights.push_back(w);
            }
            if (a.tom_row_ok[other]) {
              n_terms += m;
              for (int q = 0; q < m; ++q) {
                const std::size_t idx = static_cast<std::size_t>(other) * m + q;
                gi_correct += ((a.gstar.at(idx) > 0.5 ? 1 : 0) == hl.noise.goals[j][q]) ? 1 : 0;
                oe_correct += ((a.cstar.at(idx) > 0.5 ? 1 : 0) == hl.relation_labels[j][q]) ? 1 : 0;
              }
            }
            ++other;
          }
          const std::vector<int> shape{n - 1, m};
          const Tensor gl = Tensor::values(shape, glabels);
          const Tensor cl = Tensor::values(shape, clabels);
          const Tensor wt = Tensor::values(shape, weights);
          // BCE(z, y) = softplus(z) - y*z, summed over weighted entries.
          const Tensor gz = nn::reshape(a.gstar_logits, shape);
          const Tensor cz = nn::reshape(a.cstar_logits, shape);
          gi_sum = nn::add(gi_sum, nn::sum_all(nn::mul(
                                       wt, nn::sub(nn::softplus(gz), nn::mul(gl, gz)))));
          oe_sum = nn::add(oe_sum, nn::sum_all(nn::mul(
                                       wt, nn::sub(nn::softplus(cz), nn::mul(cl, cz)))));
        }
      }
    }
  }

  if (n_terms == 0) throw std::invalid_argument("tom_update: no supervised terms in buffer");
  const double inv_n = 1.0 / static_cast<double>(n_terms);
  const Tensor gi_loss = nn::scale(gi_sum, inv_n);
  const Tensor oe_loss = nn::scale(oe_sum, inv_n);
  const Tensor total = nn::add(gi_loss, oe_loss);
  nn::backward(total);

  TomLosses out;
  out.gi = gi_loss.item();
  out.oe = oe_loss.item();
  out.gi_acc = static_cast<double>(gi_correct) / n_terms;
  out.oe_acc = static_cast<double>(oe_correct) / n_terms;
  if (apply) {
    opt.step(store, kBeliefPrefix, cfg.lr);
    store.zero_grad();
  } else {
    store.zero_grad();
  }
  return out;
}

double decision_kl(const std::vector<double>& p_nomsg, const std::vector<double>& p_with,
                   const std::vector<std::uint8_t>& mask, bool one_choice) {
  if (p_nomsg.size() != p_with.size()) throw std::invalid_argument("decision_kl: size mismatch");
  constexpr double kEps = 1e-7;
  double kl = 0.0;
  for (std::size_t q = 0; q < p_with.size(); ++q) {
    if (!mask.empty() && !mask[q]) continue;
    const double p = std::clamp(p_nomsg[q], kEps, 1.0 - kEps);
    const double r = std::clamp(p_with[q], kEps, 1.0 - kEps);
    if (one_choice) {
      kl += p * std::log(p / r);
    } else {
      kl += p * std::log(p / r) + (1.0 - p) * std::log((1.0 - p) / (1.0 - r));
    }
  }
  return kl;
}

CrResult cr_tune(const RolloutBatch& batch, const TomModel& model, nn::ParamStore& store,
                 const nn::AdamOptimizer& opt, const TrainConfig& cfg, bool apply) {
  if (batch.episodes.empty()) throw std::invalid_argument("cr_tune: empty batch");
  const bool one_choice = model.cfg.task == "coopnav";
  store.zero_grad();

  Tensor loss_sum = Tensor::scalar(0.0);
  long long labeled = 0, retain_labels = 0;
  double p_retain_acc = 0.0;

  for (const auto& ep : batch.episodes) {
    const int n = static_cast<int>(ep.steps.front().inputs.poses.size());
    const int m = static_cast<int>(ep.steps.front().relation_labels.front().size());
    if (n < 2) continue;
    TeamPipeline pipeline(&model, n, m, batch.pose_mask_radius);
    for (const auto& hl : ep.steps) {
      if (hl.probs_nomsg.empty()) {
        throw std::invalid_argument("cr_tune: batch lacks counterfactual distributions");
      }
      // Receiver labels: messages mattered iff the goal distribution moved.
      std::vector<int> label(n, 0);
      for (int r = 0; r < n; ++r) {
        const double chi =
            decision_kl(hl.probs_nomsg[r], hl.probs_with[r], hl.inputs.masks[r], one_choice);
        label[r] = chi >= cfg.cr_threshold ? 1 : 0;
      }
      const auto team = pipeline.decide(hl.inputs, GradFlow::Comm, /*deterministic=*/true,
                                        nullptr, nullptr, false, false);
      for (int s = 0; s < n; ++s) {
        const auto& a = team.agents[s];
        const Tensor lsm = nn::log_softmax_rows(a.edge_logits);
        int other = 0;
        for (int r = 0; r < n; ++r) {
          if (r == s) continue;
          if (!a.forced_cut[other]) {
            const int l = label[r];
            loss_sum = nn::add(loss_sum,
                               nn::neg(nn::element(lsm, static_cast<std::size_t>(other) * 2 + l)));
            ++labeled;
            retain_labels += l;
            p_retain_acc += a.p_retain[other];
          }
          ++other;
        }
      }
    }
  }
  if (labeled == 0) throw std::invalid_argument("cr_tune: no labeled edges");

  const Tensor loss = nn::scale(loss_sum, 1.0 / static_cast<double>(labeled));
  nn::backward(loss);
  CrResult out;
  out.loss = loss.item();
  out.labeled_edges = labeled;
  out.retain_labels = retain_labels;
  out.mean_p_retain = p_retain_acc / static_cast<double>(labeled);
  if (apply) {
    opt.step(store, kCommPrefix, cfg.lr);
  }
  store.zero_grad();
  return out;
}

ModelConfig model_config_for(const EnvConfig& env_cfg) {
  ModelConfig mc;
  mc.task = env_cfg.task;
  return mc;
}

TrainResult train(const RunConfig& run, const std::string& run_dir,
                  const std::string& resume_checkpoint) {
  namespace fs = std::filesystem;
  run.env.validate();
  run.train.validate();
  fs::create_directories(run_dir);
  fs::create_directories(run_dir + "/checkpoints");

  const std::string metrics_path = run_dir + "/metrics.csv";
  const std::string config_snapshot = run_dir + "/config.snapshot";

  RunManifest manifest;
  manifest.version = kVersionTag;
  manifest.seed = run.train.seed;
  manifest.config_snapshot = config_snapshot;
  manifest.artifacts = {metrics_path, run_dir + "/checkpoints"};
  write_manifest(run_dir + "/manifest.txt", manifest);
  write_config_snapshot(config_snapshot, run.env, run.train);

  nn::ParamStore store;
  const ModelConfig mc = model_config_for(run.env);
  long long env_steps = 0, episodes = 0, rl_updates = 0;
  double gamma = run.train.gamma0;
  std::uint64_t round_index = 0;
  if (resume_checkpoint.empty()) {
    Rng init_rng(run.train.seed ^ 0x5eedULL);
    TomModel::create(mc, store, init_rng);
  } else {
    std::map<std::string, double> meta;
    store = nn::ParamStore::load(resume_checkpoint, &meta);
    env_steps = static_cast<long long>(meta.at("env_steps"));
    episodes = static_cast<long long>(meta.at("episodes"));
    rl_updates = static_cast<long long>(meta.at("rl_updates"));
    gamma = meta.at("gamma");
    round_index = static_cast<std::uint64_t>(meta.at("round_index"));
  }
  const TomModel model = TomModel::bind(mc, store);
  const nn::AdamOptimizer adam;

  auto checkpoint_name = [&](long long step) {
    std::ostringstream os;
    os << run_dir << "/checkpoints/ckpt_" << step << ".toma";
    return os.str();
  };
  auto save_checkpoint = [&](long long step) {
    std::map<std::string, double> meta;
    meta["env_steps"] = static_cast<double>(env_steps);
    meta["episodes"] = static_cast<double>(episodes);
    meta["rl_updates"] = static_cast<double>(rl_updates);
    meta["gamma"] = gamma;
    meta["round_index"] = static_cast<double>(round_index);
    const std::string path = checkpoint_name(step);
    store.save(path, meta);
    return path;
  };

  std::ofstream metrics;
  const bool fresh_metrics = !fs::exists(metrics_path) || resume_checkpoint.empty();
  metrics.open(metrics_path, fresh_metrics ? std::ios::trunc : std::ios::app);
  if (!metrics) throw std::runtime_error("cannot write metrics: " + metrics_path);
  if (fresh_metrics) {
    metrics << "step,episode,gamma,L,mean_reward,coverage,gi_loss,oe_loss,cr_loss,mean_edges,"
               "mean_bandwidth,tom_gi_acc,tom_oe_acc\n";
  }

  std::string last_ckpt = save_checkpoint(env_steps);
  long long next_ckpt_at = env_steps + run.train.checkpoint_every;
  std::vector<RolloutBatch> tom_buffer;
  double last_gi = std::nan(""), last_oe = std::nan(""), last_cr = std::nan("");
  double last_gi_acc = std::nan(""), last_oe_acc = std::nan("");

  while (env_steps < run.train.max_steps) {
    const int L = curriculum_episode_len(gamma);
    RolloutBatch batch =
        collect_rollouts(run.env, model, run.train, L, round_index++, /*both_modes=*/false);
    env_steps += batch.env_steps;
    episodes += static_cast<long long>(batch.episodes.size());

    const A2CLosses losses = a2c_update(batch, model, store, adam, run.train, gamma);
    ++rl_updates;
    const double mean_reward = batch.mean_reward();
    const double mean_metric = batch.mean_metric();
    const double mean_edges = batch.mean_edges_per_decision();
    tom_buffer.push_back(std::move(batch));

    if (rl_updates % run.train.tom_freeze == 0) {
      const TomLosses tl = tom_update(tom_buffer, model, store, adam, run.train);
      last_gi = tl.gi;
      last_oe = tl.oe;
      last_gi_acc = tl.gi_acc;
      last_oe_acc = tl.oe_acc;
      tom_buffer.clear();
    }
    if (episodes >= run.train.warmup_episodes) {
      gamma = curriculum_tick(gamma, run.train).gamma;
    }

    metrics << env_steps << "," << episodes << "," << gamma << "," << curriculum_episode_len(gamma)
            << "," << mean_reward << "," << mean_metric << "," << last_gi << "," << last_oe << ","
            << last_cr << "," << mean_edges << "," << mean_edges * run.env.m_targets << ","
            << last_gi_acc << "," << last_oe_acc << "\n";
    metrics.flush();
    (void)losses;

    if (env_steps >= next_ckpt_at) {
      last_ckpt = save_checkpoint(env_steps);
      next_ckpt_at += run.train.checkpoint_every;
    }
  }

  for (int k = 0; k < run.train.cr_updates; ++k) {
    const int L = curriculum_episode_len(gamma);
    RolloutBatch batch =
        collect_rollouts(run.env, model, run.train, L, round_index++, /*both_modes=*/true);
    env_steps += batch.env_steps;
    episodes += static_cast<long long>(batch.episodes.size());
    const CrResult cr = cr_tune(batch, model, store, adam, run.train);
    last_cr = cr.loss;
    metrics << env_steps << "," << episodes << "," << gamma << "," << L << ","
            << batch.mean_reward() << "," << batch.mean_metric() << "," << last_gi << ","
            << last_oe << "," << last_cr << "," << batch.mean_edges_per_decision() << ","
            << batch.mean_edges_per_decision() * run.env.m_targets << "," << last_gi_acc << ","
            << last_oe_acc << "\n";
    metrics.flush();
  }

  last_ckpt = save_checkpoint(env_steps);
  TrainResult res;
  res.final_checkpoint = last_ckpt;
  res.env_steps = env_steps;
  res.episodes = episodes;
  return res;
}

}  // namespace toma
