#pragma once

#include <vector>

#include "toma/msmtc_env.hpp"

namespace toma {

// Objective of the privileged one-step search: after applying `actions`,
// sum over targets of the minimum absolute bearing error to any sensor
// (targets frozen during the lookahead).
double heuristic_objective(const MsmtcState& state, const EnvConfig& cfg,
                           const std::vector<int>& actions);

// Exhaustive argmin over all 3^n joint actions; ties resolve to the
// lexicographically first joint action (Stay < RotLeft < RotRight, agent 0
// most significant). Rejects teams larger than `max_agents`.
std::vector<int> heuristic_action(const MsmtcState& state, const EnvConfig& cfg,
                                  int max_agents = 12);

}  // namespace toma
