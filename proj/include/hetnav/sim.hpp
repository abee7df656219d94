#pragma once

#include <limits>
#include <ostream>
#include <vector>

#include "hetnav/core.hpp"
#include "hetnav/orca.hpp"

namespace hetnav {

/// Commanded motion of the center robot for one step. The heading is an
/// absolute world-frame angle; the robot reaches the commanded velocity
/// immediately and holds it for dt.
struct Action {
  double speed = 0.0;
  double heading = 0.0;
};

enum class EventKind { None, ReachedGoal, Collision, Timeout };

const char* to_string(EventKind kind);

/// Outcome of one step. min_separation is the smallest surface-to-surface
/// distance between the center robot and any neighbor this step (+infinity
/// when the scene has no neighbors; negative exactly when colliding).
struct StepEvent {
  EventKind kind = EventKind::None;
  double min_separation = std::numeric_limits<double>::infinity();
};

/// Kinematic update: p' = p + v_cmd * dt, v' = v_cmd, heading tracks the
/// commanded direction (unchanged for a zero command). Commands beyond
/// v_pref are clamped; `clamped`, when given, reports that.
AgentState integrate(const AgentState& agent, Vec2 commanded_velocity,
                     double dt, bool* clamped = nullptr);

/// Classifies post-integration states. Precedence:
/// Collision > ReachedGoal > Timeout > None.
StepEvent detect_events(const std::vector<AgentState>& states, double t,
                        const ScenarioConfig& config);

/// Shaped reward for one transition:
///   ReachedGoal -> 1.0, Collision -> -0.25, otherwise
///   discomfort -0.1 * (discomfort_dist - min_sep) when 0 <= min_sep <
///   discomfort_dist, plus progress 0.2 * (prev_d_g - d_g). A timeout adds
///   nothing on top of those terms.
double reward(double prev_d_g, double d_g, const StepEvent& event,
              const ScenarioConfig& config);

/// ORCA velocities for every peer, computed from the shared pre-step states.
/// Humans do not see the center robot (it is invisible to them); other robots
/// see everything. Slot 0 of the result (the center robot, when present)
/// is left at the agent's current velocity and must be overridden by the
/// caller. Works equally on scenes without a center robot.
std::vector<Vec2> orca_peer_velocities(const std::vector<AgentState>& agents,
                                       const OrcaParams& params, double dt);

struct StepResult {
  double reward = 0.0;
  StepEvent event;
  bool done = false;
};

/// One episode of the circle-crossing environment. Agents index 0 is the
/// center robot; stepping a finished episode throws std::logic_error.
class Environment {
 public:
  /// Samples a fresh scene from the config with the given stream.
  Environment(const ScenarioConfig& config, RngStream& rng);
  /// Adopts a prepared scene (index 0 must be the center robot).
  Environment(const ScenarioConfig& config, std::vector<AgentState> agents);

  const ScenarioConfig& config() const { return config_; }
  const OrcaParams& orca_params() const { return orca_; }
  const std::vector<AgentState>& agents() const { return agents_; }
  double t() const { return t_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  EventKind outcome() const { return outcome_; }
  int overspeed_clamps() const { return overspeed_clamps_; }

  JointObservation observe() const { return to_robot_frame(agents_); }

  StepResult step(const Action& action);

 private:
  ScenarioConfig config_;
  OrcaParams orca_;
  std::vector<AgentState> agents_;
  double t_ = 0.0;
  int steps_ = 0;
  bool done_ = false;
  EventKind outcome_ = EventKind::None;
  int overspeed_clamps_ = 0;
};

/// Scene-wide rollout with every agent (center robot included) under ORCA and
/// full mutual visibility; runs for the configured time limit or until all
/// agents stand on their goals. Used by the reciprocal-avoidance soundness
/// checks.
struct OrcaOnlyResult {
  double min_pair_separation = std::numeric_limits<double>::infinity();
  int steps = 0;
  bool all_reached = false;
};

OrcaOnlyResult run_orca_only(const ScenarioConfig& config, RngStream& rng);

/// Streams one JSON object per step: t, per-agent kinematics, the action,
/// reward, event and min_separation (null when the scene has no neighbors).
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(std::ostream& out) : out_(out) {}

  void write_step(double t, const std::vector<AgentState>& agents,
                  const Action& action, double step_reward,
                  const StepEvent& event);

 private:
  std::ostream& out_;
};

}  // namespace hetnav
