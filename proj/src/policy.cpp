#include "hetnav/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace hetnav {

ActionSpace action_space(double v_pref) {
  if (v_pref <= 0.0) throw std::invalid_argument("action_space: v_pref <= 0");
  ActionSpace space;
  space.actions.reserve(80);
  for (int k = 1; k <= 5; ++k) {
    const double speed =
        v_pref * (std::exp(k / 5.0) - 1.0) / (std::exp(1.0) - 1.0);
    for (int j = 0; j < 16; ++j) {
      space.actions.push_back(Action{speed, kTwoPi * j / 16.0});
    }
  }
  return space;
}

JointObservation lookahead_propagate(const std::vector<AgentState>& states,
                                     const Action& action, double dt) {
  std::vector<AgentState> predicted = states;
  for (AgentState& agent : predicted) {
    if (agent.kind == AgentKind::CenterRobot) {
      const Vec2 v{action.speed * std::cos(action.heading),
                   action.speed * std::sin(action.heading)};
      agent = integrate(agent, v, dt);
    } else {
      agent.p += agent.v * dt;
    }
  }
  return to_robot_frame(predicted);
}

namespace {

// Reward of the predicted transition, read entirely off the predicted
// observation (d_a - r_sum gives each neighbor's surface distance).
double predicted_reward(double prev_d_g, const JointObservation& obs,
                        const ScenarioConfig& config) {
  StepEvent event;
  for (const NeighborObs& n : obs.humans) {
    event.min_separation = std::min(event.min_separation, n.d_a - n.r_sum);
  }
  for (const NeighborObs& n : obs.other_robots) {
    event.min_separation = std::min(event.min_separation, n.d_a - n.r_sum);
  }
  if (event.min_separation < 0.0) {
    event.kind = EventKind::Collision;
  } else if (obs.cr.d_g < config.agent_radius) {
    event.kind = EventKind::ReachedGoal;
  }
  return reward(prev_d_g, obs.cr.d_g, event, config);
}

double dist_to_goal_of_center(const std::vector<AgentState>& states) {
  for (const AgentState& s : states) {
    if (s.kind == AgentKind::CenterRobot) return s.dist_to_goal();
  }
  throw std::invalid_argument("no center robot in state list");
}

}  // namespace

std::vector<double> greedy_scores(const std::vector<AgentState>& states,
                                  const ModelParams& params,
                                  const ActionSpace& space, double gamma,
                                  const ScenarioConfig& config) {
  const double prev_d_g = dist_to_goal_of_center(states);

  std::vector<JointObservation> predicted;
  predicted.reserve(space.actions.size());
  for (const Action& action : space.actions) {
    predicted.push_back(lookahead_propagate(states, action, config.dt));
  }
  const std::vector<double> values = value_batch(predicted, params);

  std::vector<double> scores(space.actions.size());
  for (std::size_t i = 0; i < space.actions.size(); ++i) {
    scores[i] =
        predicted_reward(prev_d_g, predicted[i], config) + gamma * values[i];
  }
  return scores;
}

ActionChoice select_action(const std::vector<AgentState>& states,
                           const ModelParams& params, const ActionSpace& space,
                           double epsilon, double gamma,
                           const ScenarioConfig& config, RngStream& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw std::invalid_argument("select_action: epsilon outside [0, 1]");
  }
  if (space.actions.empty()) {
    throw std::invalid_argument("select_action: empty action space");
  }

  if (epsilon > 0.0 && rng.uniform() < epsilon) {
    const int index =
        static_cast<int>(rng.uniform_int(space.actions.size()));
    return ActionChoice{space.actions[index], index, true};
  }

  const std::vector<double> scores =
      greedy_scores(states, params, space, gamma, config);
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return ActionChoice{space.actions[best], best, false};
}

}  // namespace hetnav
