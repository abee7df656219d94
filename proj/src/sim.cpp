#include "hetnav/sim.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace hetnav {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::None: return "none";
    case EventKind::ReachedGoal: return "reached_goal";
    case EventKind::Collision: return "collision";
    case EventKind::Timeout: return "timeout";
  }
  return "?";
}

AgentState integrate(const AgentState& agent, Vec2 commanded_velocity,
                     double dt, bool* clamped) {
  if (clamped != nullptr) *clamped = false;
  const double speed = commanded_velocity.norm();
  if (speed > agent.v_pref + 1e-9) {
    commanded_velocity = commanded_velocity * (agent.v_pref / speed);
    if (clamped != nullptr) *clamped = true;
  }
  AgentState next = agent;
  next.p = agent.p + commanded_velocity * dt;
  next.v = commanded_velocity;
  if (commanded_velocity.norm_sq() > 0.0) {
    next.heading =
        wrap_angle(std::atan2(commanded_velocity.y, commanded_velocity.x));
  }
  return next;
}

StepEvent detect_events(const std::vector<AgentState>& states, double t,
                        const ScenarioConfig& config) {
  const AgentState* cr = nullptr;
  for (const AgentState& s : states) {
    if (s.kind == AgentKind::CenterRobot) {
      cr = &s;
      break;
    }
  }
  if (cr == nullptr) {
    throw std::invalid_argument("detect_events: no center robot");
  }

  StepEvent event;
  for (const AgentState& s : states) {
    if (&s == cr) continue;
    const double sep = (s.p - cr->p).norm() - s.r - cr->r;
    event.min_separation = std::min(event.min_separation, sep);
  }

  if (event.min_separation < 0.0) {
    event.kind = EventKind::Collision;
  } else if (cr->dist_to_goal() < config.agent_radius) {
    event.kind = EventKind::ReachedGoal;
  } else if (t >= config.time_limit) {
    event.kind = EventKind::Timeout;
  }
  return event;
}

double reward(double prev_d_g, double d_g, const StepEvent& event,
              const ScenarioConfig& config) {
  if (event.kind == EventKind::ReachedGoal) return 1.0;
  if (event.kind == EventKind::Collision) return -0.25;
  double r = 0.2 * (prev_d_g - d_g);
  if (event.min_separation >= 0.0 &&
      event.min_separation < config.discomfort_dist) {
    r += -0.1 * (config.discomfort_dist - event.min_separation);
  }
  return r;
}

std::vector<Vec2> orca_peer_velocities(const std::vector<AgentState>& agents,
                                       const OrcaParams& params, double dt) {
  std::vector<Vec2> velocities(agents.size());
  std::vector<AgentState> visible;
  visible.reserve(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const AgentState& self = agents[i];
    if (self.kind == AgentKind::CenterRobot) {
      velocities[i] = self.v;
      continue;
    }
    visible.clear();
    for (std::size_t j = 0; j < agents.size(); ++j) {
      if (j == i) continue;
      // The center robot is invisible to humans, visible to other robots.
      if (self.kind == AgentKind::Human &&
          agents[j].kind == AgentKind::CenterRobot) {
        continue;
      }
      visible.push_back(agents[j]);
    }
    velocities[i] = orca_velocity(self, visible, params, dt);
  }
  return velocities;
}

Environment::Environment(const ScenarioConfig& config, RngStream& rng)
    : Environment(config, sample_circle_crossing(config, rng)) {}

Environment::Environment(const ScenarioConfig& config,
                         std::vector<AgentState> agents)
    : config_(config), agents_(std::move(agents)) {
  config_.validate();
  if (agents_.empty() || agents_[0].kind != AgentKind::CenterRobot) {
    throw std::invalid_argument("Environment: agents[0] must be the center robot");
  }
  orca_.max_speed = config_.v_pref;
}

StepResult Environment::step(const Action& action) {
  if (done_) throw std::logic_error("Environment::step: episode already done");
  if (action.speed < 0.0) {
    throw std::invalid_argument("Environment::step: negative action speed");
  }

  const double prev_d_g = agents_[0].dist_to_goal();

  // All velocities come from the pre-step states, then every agent moves at
  // once; the result cannot depend on iteration order.
  std::vector<Vec2> velocities = orca_peer_velocities(agents_, orca_, config_.dt);
  velocities[0] = Vec2{action.speed * std::cos(action.heading),
                       action.speed * std::sin(action.heading)};

  for (std::size_t i = 0; i < agents_.size(); ++i) {
    bool clamped = false;
    agents_[i] = integrate(agents_[i], velocities[i], config_.dt, &clamped);
    if (clamped && i == 0) ++overspeed_clamps_;
  }
  ++steps_;
  t_ = steps_ * config_.dt;

  StepResult result;
  result.event = detect_events(agents_, t_, config_);
  result.reward = reward(prev_d_g, agents_[0].dist_to_goal(), result.event,
                         config_);
  result.done = result.event.kind != EventKind::None;
  if (result.done) {
    done_ = true;
    outcome_ = result.event.kind;
  }
  return result;
}

OrcaOnlyResult run_orca_only(const ScenarioConfig& config, RngStream& rng) {
  std::vector<AgentState> agents = sample_circle_crossing(config, rng);
  OrcaParams params;
  params.max_speed = config.v_pref;

  const auto min_pair_sep = [&agents]() {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < agents.size(); ++i) {
      for (std::size_t j = i + 1; j < agents.size(); ++j) {
        const double sep =
            (agents[i].p - agents[j].p).norm() - agents[i].r - agents[j].r;
        m = std::min(m, sep);
      }
    }
    return m;
  };

  OrcaOnlyResult result;
  result.min_pair_separation = min_pair_sep();

  const int max_steps =
      static_cast<int>(std::ceil(config.time_limit / config.dt));
  std::vector<AgentState> visible;
  for (int step = 0; step < max_steps; ++step) {
    std::vector<Vec2> velocities(agents.size());
    for (std::size_t i = 0; i < agents.size(); ++i) {
      visible.assign(agents.begin(), agents.end());
      visible.erase(visible.begin() + static_cast<std::ptrdiff_t>(i));
      velocities[i] = orca_velocity(agents[i], visible, params, config.dt);
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
      agents[i] = integrate(agents[i], velocities[i], config.dt);
    }
    ++result.steps;
    result.min_pair_separation =
        std::min(result.min_pair_separation, min_pair_sep());

    bool all_reached = true;
    for (const AgentState& a : agents) {
      if (a.dist_to_goal() >= config.agent_radius) {
        all_reached = false;
        break;
      }
    }
    if (all_reached) {
      result.all_reached = true;
      break;
    }
  }
  return result;
}

void TrajectoryWriter::write_step(double t,
                                  const std::vector<AgentState>& agents,
                                  const Action& action, double step_reward,
                                  const StepEvent& event) {
  nlohmann::json record;
  record["t"] = t;
  nlohmann::json agent_list = nlohmann::json::array();
  for (const AgentState& a : agents) {
    agent_list.push_back({{"kind", to_string(a.kind)},
                          {"p", {a.p.x, a.p.y}},
                          {"v", {a.v.x, a.v.y}},
                          {"r", a.r}});
  }
  record["agents"] = std::move(agent_list);
  record["action"] = {{"speed", action.speed}, {"heading", action.heading}};
  record["reward"] = step_reward;
  record["event"] = to_string(event.kind);
  if (std::isfinite(event.min_separation)) {
    record["min_separation"] = event.min_separation;
  } else {
    record["min_separation"] = nullptr;
  }
  out_ << record.dump() << "\n";
}

}  // namespace hetnav
