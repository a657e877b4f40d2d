#include "toma/heuristic.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace toma {

namespace {

double action_delta(int a) {
  switch (static_cast<MsmtcAction>(a)) {
    case MsmtcAction::Stay: return 0.0;
    case MsmtcAction::RotLeft: return kRotStep;
    case MsmtcAction::RotRight: return -kRotStep;
  }
  throw std::invalid_argument("heuristic: invalid action");
}

}  // namespace

double heuristic_objective(const MsmtcState& state, const EnvConfig& cfg,
                           const std::vector<int>& actions) {
  (void)cfg;
  const int n = static_cast<int>(state.sensors.size());
  const int m = static_cast<int>(state.targets.size());
  if (static_cast<int>(actions.size()) != n) {
    throw std::invalid_argument("heuristic_objective: one action per sensor required");
  }
  double total = 0.0;
  for (int q = 0; q < m; ++q) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const auto& s = state.sensors[i];
      const double yaw = normalize_angle(s.yaw + action_delta(actions[i]));
      const double bearing =
          std::atan2(state.targets[q].position.y - s.y, state.targets[q].position.x - s.x);
      best = std::min(best, std::abs(normalize_angle(bearing - yaw)));
    }
    total += best;
  }
  return total;
}

std::vector<int> heuristic_action(const MsmtcState& state, const EnvConfig& cfg, int max_agents) {
  const int n = static_cast<int>(state.sensors.size());
  const int m = static_cast<int>(state.targets.size());
  if (n > max_agents) {
    throw std::invalid_argument("heuristic_action: team too large for exhaustive search");
  }

  // cost[i][a][q]: bearing error of target q for sensor i after action a.
  std::vector<double> cost(static_cast<std::size_t>(n) * 3 * m);
  for (int i = 0; i < n; ++i) {
    const auto& s = state.sensors[i];
    for (int q = 0; q < m; ++q) {
      const double bearing =
          std::atan2(state.targets[q].position.y - s.y, state.targets[q].position.x - s.x);
      for (int a = 0; a < 3; ++a) {
        const double yaw = normalize_angle(s.yaw + action_delta(a));
        cost[(static_cast<std::size_t>(i) * 3 + a) * m + q] =
            std::abs(normalize_angle(bearing - yaw));
      }
    }
  }
  (void)cfg;

  long long combos = 1;
  for (int i = 0; i < n; ++i) combos *= 3;

  std::vector<int> best_actions(n, 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> actions(n);
  for (long long code = 0; code < combos; ++code) {
    long long rem = code;
    for (int i = n - 1; i >= 0; --i) {
      actions[i] = static_cast<int>(rem % 3);
      rem /= 3;
    }
    double total = 0.0;
    for (int q = 0; q < m; ++q) {
      double tb = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        tb = std::min(tb, cost[(static_cast<std::size_t>(i) * 3 + actions[i]) * m + q]);
      }
      total += tb;
    }
    if (total < best) {
      best = total;
      best_actions = actions;
    }
  }
  return best_actions;
}

}  // namespace toma
