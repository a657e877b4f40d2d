#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "toma/env.hpp"

namespace toma {

struct ReplayStep {
  double reward = 0.0;
  std::vector<double> agent_state;           // yaws (msmtc) or positions (coopnav)
  std::vector<double> target_xy;             // msmtc target positions
  std::vector<std::pair<int, int>> comm;     // delivered messages this step
};

struct Replay {
  std::string task;
  int n = 0;
  int m = 0;
  double arena = 1.0;
  double sense_radius = 0.0;
  double fov_halfangle = 0.0;
  std::vector<Vec2> sensors;    // msmtc fixed sensor positions
  std::vector<Obstacle> obstacles;
  std::vector<Vec2> landmarks;  // coopnav
  std::vector<ReplayStep> steps;
};

// Line-delimited text: a header block followed by one `step` line per step.
class ReplayWriter {
 public:
  ReplayWriter(std::ostream& out, const Env& env);
  void add_step(const Env& env, double reward, const std::vector<std::pair<int, int>>& comm);

 private:
  std::ostream& out_;
};

Replay read_replay(const std::string& path);

}  // namespace toma
