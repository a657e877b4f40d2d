#include "toma/env_config.hpp"

#include <cmath>

namespace toma {

namespace {

EnvConfig read_into(EnvConfig cfg, const std::vector<KvEntry>& entries) {
  KvReader r(entries);
  cfg.task = r.get_string("task", cfg.task);
  cfg.n_agents = static_cast<int>(r.get_int("n_agents", cfg.n_agents));
  cfg.m_targets = static_cast<int>(r.get_int("m_targets", cfg.m_targets));
  cfg.arena_side = r.get_double("arena_side", cfg.arena_side);
  cfg.sense_radius = r.get_double("sense_radius", cfg.sense_radius);
  cfg.fov_halfangle = r.get_double("fov_halfangle", cfg.fov_halfangle);
  cfg.n_obstacles = static_cast<int>(r.get_int("n_obstacles", cfg.n_obstacles));
  cfg.obstacle_radius_min = r.get_double("obstacle_radius_min", cfg.obstacle_radius_min);
  cfg.obstacle_radius_max = r.get_double("obstacle_radius_max", cfg.obstacle_radius_max);
  cfg.random_walk_prob = r.get_double("random_walk_prob", cfg.random_walk_prob);
  cfg.target_speed = r.get_double("target_speed", cfg.target_speed);
  cfg.high_level_period = static_cast<int>(r.get_int("high_level_period", cfg.high_level_period));
  cfg.episode_length = static_cast<int>(r.get_int("episode_length", cfg.episode_length));
  cfg.pose_visibility_radius = r.get_double("pose_visibility_radius", cfg.pose_visibility_radius);
  cfg.move_step = r.get_double("move_step", cfg.move_step);
  cfg.collision_diameter = r.get_double("collision_diameter", cfg.collision_diameter);
  cfg.rng_seed = static_cast<std::uint64_t>(r.get_int("rng_seed", static_cast<long long>(cfg.rng_seed)));
  r.finish();
  cfg.validate();
  return cfg;
}

}  // namespace

void EnvConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  if (task != "msmtc" && task != "coopnav") fail("task must be msmtc or coopnav");
  if (n_agents <= 0) fail("n_agents must be positive");
  if (m_targets <= 0) fail("m_targets must be positive");
  if (!(arena_side > 0.0)) fail("arena_side must be positive");
  if (!(sense_radius > 0.0)) fail("sense_radius must be positive");
  if (!(fov_halfangle > 0.0) || fov_halfangle > kPi) fail("fov_halfangle must be in (0, pi]");
  if (n_obstacles < 0) fail("n_obstacles must be nonnegative");
  if (random_walk_prob < 0.0 || random_walk_prob > 1.0) fail("random_walk_prob must be in [0,1]");
  if (target_speed < 0.0) fail("target_speed must be nonnegative");
  if (high_level_period <= 0) fail("high_level_period must be positive");
  if (episode_length <= 0) fail("episode_length must be positive");
  if (!(pose_visibility_radius > 0.0)) fail("pose_visibility_radius must be positive");
  if (!(move_step > 0.0)) fail("move_step must be positive");
  if (!(collision_diameter > 0.0)) fail("collision_diameter must be positive");
  if (task == "coopnav" && m_targets != n_agents) fail("coopnav requires m_targets == n_agents");
}

EnvConfig EnvConfig::from_entries(const std::vector<KvEntry>& entries) {
  return read_into(EnvConfig{}, entries);
}

EnvConfig EnvConfig::from_file(const std::string& path) {
  return read_into(EnvConfig{}, parse_kv_file(path));
}

EnvConfig apply_env_overrides(EnvConfig cfg, const std::vector<KvEntry>& overrides) {
  return read_into(std::move(cfg), overrides);
}

}  // namespace toma
