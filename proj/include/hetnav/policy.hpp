#pragma once

#include <vector>

#include "hetnav/model.hpp"
#include "hetnav/sim.hpp"

namespace hetnav {

/// The 80 discrete actions: 5 speeds, exponentially spaced up to v_pref,
/// times 16 evenly spaced absolute headings. Index order is speed-major:
/// index = (speed_index) * 16 + heading_index.
struct ActionSpace {
  std::vector<Action> actions;

  int size() const { return static_cast<int>(actions.size()); }
  const Action& operator[](int i) const { return actions[i]; }
};

/// Speeds v_k = v_pref * (e^{k/5} - 1) / (e - 1) for k = 1..5; headings
/// 2*pi*j/16 for j = 0..15.
ActionSpace action_space(double v_pref);

/// Predicted observation after dt: the center robot moves under the action,
/// everyone else keeps their current velocity. Pure; never touches the
/// real environment.
JointObservation lookahead_propagate(const std::vector<AgentState>& states,
                                     const Action& action, double dt);

/// One-step lookahead scores: for each action, the predicted transition
/// reward plus gamma times the value of the predicted observation.
std::vector<double> greedy_scores(const std::vector<AgentState>& states,
                                  const ModelParams& params,
                                  const ActionSpace& space, double gamma,
                                  const ScenarioConfig& config);

struct ActionChoice {
  Action action;
  int index = 0;
  bool exploratory = false;
};

/// Epsilon-greedy selection. With probability epsilon picks uniformly
/// (consuming two draws: the coin, then the index); otherwise returns the
/// lowest-index argmax of greedy_scores. epsilon == 0 consumes no
/// randomness at all.
ActionChoice select_action(const std::vector<AgentState>& states,
                           const ModelParams& params, const ActionSpace& space,
                           double epsilon, double gamma,
                           const ScenarioConfig& config, RngStream& rng);

}  // namespace hetnav
