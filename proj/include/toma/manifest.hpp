#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "toma/env_config.hpp"

namespace toma {

struct TrainConfig;

// Run provenance: written atomically at run start and it lists every
// artifact path the run will produce.
struct RunManifest {
  std::string version;
  std::uint64_t seed = 0;
  std::string config_snapshot;
  std::vector<std::string> artifacts;
};

void write_manifest(const std::string& path, const RunManifest& manifest);
void write_config_snapshot(const std::string& path, const EnvConfig& env, const TrainConfig& train);

}  // namespace toma
