#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "toma/geometry.hpp"
#include "toma/kvconfig.hpp"

namespace toma {

// Shared environment configuration. Distances are in arena units (the arena
// is the axis-aligned square [0, arena_side]^2).
struct EnvConfig {
  std::string task = "msmtc";  // "msmtc" | "coopnav"
  int n_agents = 4;
  int m_targets = 5;
  double arena_side = 1.0;
  double sense_radius = 0.6;
  double fov_halfangle = kPi / 4.0;
  int n_obstacles = 2;
  double obstacle_radius_min = 0.05;
  double obstacle_radius_max = 0.15;
  double random_walk_prob = 0.5;
  double target_speed = 0.01;
  int high_level_period = 10;  // K low-level steps per decision
  int episode_length = 100;    // L
  double pose_visibility_radius = std::numeric_limits<double>::infinity();
  double move_step = 0.05;           // coopnav agent step
  double collision_diameter = 0.1;   // coopnav collision threshold
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws ConfigError on violated invariants

  static EnvConfig from_entries(const std::vector<KvEntry>& entries);
  static EnvConfig from_file(const std::string& path);
};

// Applies `key=value` override strings (e.g. from the command line) on top of
// an existing config. Unknown keys raise ConfigError.
EnvConfig apply_env_overrides(EnvConfig cfg, const std::vector<KvEntry>& overrides);

}  // namespace toma
