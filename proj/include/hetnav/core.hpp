#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetnav/geom.hpp"
#include "hetnav/rng.hpp"

namespace hetnav {

enum class AgentKind { CenterRobot, Human, OtherRobot };

/// Model/observation variants. HoR* collapse the five relations into one;
/// *_nocate drop the category bit from neighbor observations.
enum class Ablation { HeR, HeR_nocate, HoR, HoR_nocate };

const char* to_string(AgentKind kind);
const char* to_string(Ablation ablation);
Ablation ablation_from_string(const std::string& name);

inline bool is_homogeneous(Ablation a) {
  return a == Ablation::HoR || a == Ablation::HoR_nocate;
}
inline bool drops_category(Ablation a) {
  return a == Ablation::HeR_nocate || a == Ablation::HoR_nocate;
}

/// Physical state of one agent. Headings live in [0, 2*pi).
struct AgentState {
  Vec2 p;
  Vec2 v;
  double r = 0.3;
  Vec2 goal;
  double v_pref = 1.0;
  double heading = 0.0;
  AgentKind kind = AgentKind::Human;

  double dist_to_goal() const { return (p - goal).norm(); }
};

/// Raised on malformed configuration documents.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  int n_humans = 0;
  int n_other_robots = 0;
  double circle_radius = 4.0;
  double agent_radius = 0.3;
  double v_pref = 1.0;
  double dt = 0.25;
  double time_limit = 25.0;
  double discomfort_dist = 0.2;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::HeR;

  void validate() const;
};

/// Strict parse: exactly the documented field names, unknown keys rejected.
/// n_humans, n_other_robots and ablation are required; the rest default.
ScenarioConfig scenario_from_json_text(const std::string& text);
ScenarioConfig load_scenario_config(const std::string& path);
std::string scenario_to_json_text(const ScenarioConfig& cfg);

/// Robot-centric observation of the center robot itself:
/// [d_g, v_pref, theta, r, v_x, v_y]. theta is the heading expressed in the
/// goal-aligned frame, wrapped to (-pi, pi].
struct CenterObs {
  double d_g = 0.0;
  double v_pref = 0.0;
  double theta = 0.0;
  double r = 0.0;
  double vx = 0.0;
  double vy = 0.0;
};

/// One neighbor in the rotated frame: [p_x, p_y, v_x, v_y, r_i, d_a, r_i+r, c].
/// c is 1 for a human, 0 for an other robot.
struct NeighborObs {
  double px = 0.0;
  double py = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double r_i = 0.0;
  double d_a = 0.0;
  double r_sum = 0.0;
  double c = 0.0;
};

struct JointObservation {
  CenterObs cr;
  std::vector<NeighborObs> humans;
  std::vector<NeighborObs> other_robots;
};

/// Samples a circle-crossing scene. Index 0 is the center robot, fixed at
/// (0, -circle_radius) with goal (0, +circle_radius); peers are placed on the
/// circle with uniform +/-0.5 m radial and +/-0.5 rad angular perturbation and
/// goal at the exact antipode of the perturbed start. Rejection resampling
/// keeps every pairwise start separation >= r_i + r_j + 0.2 m.
/// Throws std::runtime_error after 1000 rejected attempts for one agent.
std::vector<AgentState> sample_circle_crossing(const ScenarioConfig& config,
                                               RngStream& rng);

/// Transforms world-frame states into the robot-centric observation: the +x
/// axis points from the center robot to its goal (falling back to the robot
/// heading when it stands exactly on the goal). Expects exactly one
/// CenterRobot in the list; throws std::invalid_argument otherwise.
JointObservation to_robot_frame(const std::vector<AgentState>& states);

}  // namespace hetnav
