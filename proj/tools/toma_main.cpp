#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "toma/evaluate.hpp"
#include "toma/render.hpp"
#include "toma/trainer.hpp"
#include "toma/version.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Precedence: command line > TOMA_* environment variables > config file.
std::vector<toma::KvEntry> env_overrides() {
  static const char* keys[] = {
      "task", "n_agents", "m_targets", "arena_side", "sense_radius", "fov_halfangle",
      "n_obstacles", "obstacle_radius_min", "obstacle_radius_max", "random_walk_prob",
      "target_speed", "high_level_period", "episode_length", "pose_visibility_radius",
      "move_step", "collision_diameter", "rng_seed", "max_steps", "workers", "update_every",
      "entropy_weight", "lr", "tom_freeze", "gamma_rate", "warmup_episodes", "gamma0",
      "episode_len0", "cr_threshold", "cr_updates", "checkpoint_every", "seed"};
  std::vector<toma::KvEntry> out;
  for (const char* key : keys) {
    std::string var = "TOMA_";
    for (const char* c = key; *c; ++c) var += static_cast<char>(std::toupper(*c));
    if (const char* val = std::getenv(var.c_str())) {
      out.push_back({key, val, 0});
    }
  }
  return out;
}

std::vector<toma::KvEntry> parse_overrides(const std::vector<std::string>& sets) {
  std::vector<toma::KvEntry> out;
  for (const auto& s : sets) {
    auto entries = toma::parse_kv_text(s, "--set");
    out.insert(out.end(), entries.begin(), entries.end());
  }
  return out;
}

toma::RunConfig resolve_config(const std::string& config_path,
                               const std::vector<std::string>& sets) {
  toma::RunConfig cfg;
  if (!config_path.empty()) cfg = toma::load_run_config(config_path);
  cfg = toma::apply_run_overrides(std::move(cfg), env_overrides());
  cfg = toma::apply_run_overrides(std::move(cfg), parse_overrides(sets));
  return cfg;
}

std::vector<int> parse_range(const std::string& spec) {
  // "2:4" -> {2,3,4}; "2,5,7" -> {2,5,7}; "3" -> {3}
  std::vector<int> out;
  const auto colon = spec.find(':');
  try {
    if (colon != std::string::npos) {
      const int lo = std::stoi(spec.substr(0, colon));
      const int hi = std::stoi(spec.substr(colon + 1));
      if (lo > hi) throw std::invalid_argument("range");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      std::istringstream in(spec);
      std::string tok;
      while (std::getline(in, tok, ',')) out.push_back(std::stoi(tok));
    }
  } catch (const std::exception&) {
    throw CLI::ValidationError("malformed range '" + spec + "' (use lo:hi or a,b,c)");
  }
  if (out.empty()) throw CLI::ValidationError("empty range '" + spec + "'");
  return out;
}

int cmd_train(const std::string& config, const std::vector<std::string>& sets,
              const std::string& run_dir, const std::string& resume) {
  const auto cfg = resolve_config(config, sets);
  const auto result = toma::train(cfg, run_dir, resume);
  std::cout << "run complete: " << result.env_steps << " env steps, " << result.episodes
            << " episodes\nfinal checkpoint: " << result.final_checkpoint << "\n";
  return 0;
}

int cmd_eval(const std::string& config, const std::vector<std::string>& sets,
             const std::string& checkpoint, const std::string& policy_name, int episodes,
             bool sample_mode, double pose_mask_radius, const std::string& out_prefix,
             const std::string& replay_dir) {
  auto cfg = resolve_config(config, sets);
  if (episodes <= 0) throw CLI::ValidationError("--episodes must be positive");
  if (pose_mask_radius > 0.0) cfg.env.pose_visibility_radius = pose_mask_radius;

  std::unique_ptr<toma::Policy> policy;
  std::unique_ptr<toma::nn::ParamStore> store;
  toma::TomModel model;
  if (policy_name == "heuristic") {
    policy = std::make_unique<toma::HeuristicPolicy>();
  } else if (policy_name == "random") {
    policy = std::make_unique<toma::RandomGoalPolicy>();
  } else {
    if (checkpoint.empty()) {
      throw CLI::ValidationError("--checkpoint is required for the learned policy");
    }
    store = std::make_unique<toma::nn::ParamStore>(toma::nn::ParamStore::load(checkpoint));
    model = toma::TomModel::bind(toma::model_config_for(cfg.env), *store);
    policy = std::make_unique<toma::TomPolicy>(&model, !sample_mode,
                                               cfg.env.pose_visibility_radius);
  }

  toma::EvalOptions opt;
  opt.episodes = episodes;
  opt.seed = cfg.train.seed + 1000;
  opt.replay_dir = replay_dir;
  const auto report = toma::eval_policy(*policy, cfg.env, opt);
  std::cout << report.to_text();
  if (!out_prefix.empty()) {
    report.write_csv(out_prefix + ".csv");
    std::ofstream txt(out_prefix + ".txt");
    txt << report.to_text();
  }
  return 0;
}

int cmd_render(const std::string& replay_path, const std::string& out_dir) {
  const auto replay = toma::read_replay(replay_path);
  const int frames = toma::render_replay(replay, out_dir);
  std::cout << "rendered " << frames << " frames into " << out_dir << "\n";
  return 0;
}

int cmd_grid(const std::string& config, const std::vector<std::string>& sets,
             const std::string& checkpoint, const std::string& agents_spec,
             const std::string& targets_spec, int episodes, const std::string& out_csv) {
  const auto cfg = resolve_config(config, sets);
  if (episodes <= 0) throw CLI::ValidationError("--episodes must be positive");
  auto store = toma::nn::ParamStore::load(checkpoint);
  const auto model = toma::TomModel::bind(toma::model_config_for(cfg.env), store);
  const auto grid =
      toma::scalability_grid(model, cfg.env, parse_range(agents_spec), parse_range(targets_spec),
                             episodes, cfg.train.seed + 5000);
  toma::write_grid_csv(grid, out_csv);
  std::cout << "grid written to " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toma: theory-of-mind multi-agent coverage/navigation"};
  app.set_version_flag("--version", toma::kVersionTag);
  app.require_subcommand(1);

  std::string config, run_dir = "runs/run", resume;
  std::vector<std::string> sets;

  auto* train = app.add_subcommand("train", "train a policy");
  train->add_option("--config", config, "key=value config file");
  train->add_option("--set", sets, "override, e.g. --set workers=1")->take_all();
  train->add_option("--run-dir", run_dir, "output directory");
  train->add_option("--resume", resume, "checkpoint to continue from");

  std::string checkpoint, policy_name = "tom", out_prefix, replay_dir;
  int episodes = 100;
  bool sample_mode = false;
  double pose_mask_radius = 0.0;
  auto* eval = app.add_subcommand("eval", "evaluate a policy");
  eval->add_option("--config", config, "key=value config file");
  eval->add_option("--set", sets, "override")->take_all();
  eval->add_option("--checkpoint", checkpoint, "trained checkpoint");
  eval->add_option("--policy", policy_name, "tom | heuristic | random");
  eval->add_option("--episodes", episodes, "evaluation episodes");
  eval->add_flag("--sample", sample_mode, "sample goals instead of greedy");
  eval->add_option("--pose-mask-radius", pose_mask_radius,
                   "finite agent-pose visibility radius");
  eval->add_option("--out", out_prefix, "write report to <out>.csv/.txt");
  eval->add_option("--replay-dir", replay_dir, "write per-episode replays");

  std::string replay_path, render_out = "frames";
  auto* render = app.add_subcommand("render", "render a replay to SVG frames");
  render->add_option("replay", replay_path, "replay file")->required();
  render->add_option("--out", render_out, "output directory");

  std::string agents_spec = "2:4", targets_spec = "2:4", grid_csv = "grid.csv";
  auto* grid = app.add_subcommand("grid", "scalability ratio grid");
  grid->add_option("--config", config, "key=value config file");
  grid->add_option("--set", sets, "override")->take_all();
  grid->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  grid->add_option("--agents", agents_spec, "range lo:hi or list");
  grid->add_option("--targets", targets_spec, "range lo:hi or list");
  grid->add_option("--episodes", episodes, "episodes per cell");
  grid->add_option("--out", grid_csv, "output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(train)) return cmd_train(config, sets, run_dir, resume);
    if (app.got_subcommand(eval)) {
      return cmd_eval(config, sets, checkpoint, policy_name, episodes, sample_mode,
                      pose_mask_radius, out_prefix, replay_dir);
    }
    if (app.got_subcommand(render)) return cmd_render(replay_path, render_out);
    if (app.got_subcommand(grid)) {
      return cmd_grid(config, sets, checkpoint, agents_spec, targets_spec, episodes, grid_csv);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const toma::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
