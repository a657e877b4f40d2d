#include "toma/manifest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "toma/trainer.hpp"

namespace toma {

void write_manifest(const std::string& path, const RunManifest& manifest) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << "toma-run 1\n";
    out << "version " << manifest.version << "\n";
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char ts[32];
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "created " << ts << "\n";
    out << "seed " << manifest.seed << "\n";
    out << "config " << manifest.config_snapshot << "\n";
    for (const auto& a : manifest.artifacts) out << "artifact " << a << "\n";
    if (!out) throw std::runtime_error("manifest write failed: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot finalize manifest: " + path);
  }
}

void write_config_snapshot(const std::string& path, const EnvConfig& env,
                           const TrainConfig& train) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config snapshot: " + path);
  out.precision(17);
  out << "task = " << env.task << "\n";
  out << "n_agents = " << env.n_agents << "\n";
  out << "m_targets = " << env.m_targets << "\n";
  out << "arena_side = " << env.arena_side << "\n";
  out << "sense_radius = " << env.sense_radius << "\n";
  out << "fov_halfangle = " << env.fov_halfangle << "\n";
  out << "n_obstacles = " << env.n_obstacles << "\n";
  out << "obstacle_radius_min = " << env.obstacle_radius_min << "\n";
  out << "obstacle_radius_max = " << env.obstacle_radius_max << "\n";
  out << "random_walk_prob = " << env.random_walk_prob << "\n";
  out << "target_speed = " << env.target_speed << "\n";
  out << "high_level_period = " << env.high_level_period << "\n";
  out << "episode_length = " << env.episode_length << "\n";
  if (std::isfinite(env.pose_visibility_radius)) {
    out << "pose_visibility_radius = " << env.pose_visibility_radius << "\n";
  } else {
    out << "pose_visibility_radius = inf\n";
  }
  out << "move_step = " << env.move_step << "\n";
  out << "collision_diameter = " << env.collision_diameter << "\n";
  out << "rng_seed = " << env.rng_seed << "\n";
  out << "max_steps = " << train.max_steps << "\n";
  out << "workers = " << train.workers << "\n";
  out << "update_every = " << train.update_every << "\n";
  out << "entropy_weight = " << train.entropy_weight << "\n";
  out << "lr = " << train.lr << "\n";
  out << "tom_freeze = " << train.tom_freeze << "\n";
  out << "gamma_rate = " << train.gamma_rate << "\n";
  out << "warmup_episodes = " << train.warmup_episodes << "\n";
  out << "gamma0 = " << train.gamma0 << "\n";
  out << "episode_len0 = " << train.episode_len0 << "\n";
  out << "cr_threshold = " << train.cr_threshold << "\n";
  out << "cr_updates = " << train.cr_updates << "\n";
  out << "checkpoint_every = " << train.checkpoint_every << "\n";
  out << "seed = " << train.seed << "\n";
}

}  // namespace toma
