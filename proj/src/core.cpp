#include "hetnav/core.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace hetnav {

using nlohmann::json;

const char* to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::CenterRobot: return "center_robot";
    case AgentKind::Human: return "human";
    case AgentKind::OtherRobot: return "other_robot";
  }
  return "?";
}

const char* to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::HeR: return "HeR";
    case Ablation::HeR_nocate: return "HeR_nocate";
    case Ablation::HoR: return "HoR";
    case Ablation::HoR_nocate: return "HoR_nocate";
  }
  return "?";
}

Ablation ablation_from_string(const std::string& name) {
  if (name == "HeR") return Ablation::HeR;
  if (name == "HeR_nocate") return Ablation::HeR_nocate;
  if (name == "HoR") return Ablation::HoR;
  if (name == "HoR_nocate") return Ablation::HoR_nocate;
  throw ConfigError("unknown ablation '" + name +
                    "' (expected HeR, HeR_nocate, HoR or HoR_nocate)");
}

void ScenarioConfig::validate() const {
  if (n_humans < 0) throw ConfigError("n_humans must be >= 0");
  if (n_other_robots < 0) throw ConfigError("n_other_robots must be >= 0");
  if (circle_radius <= 0.0) throw ConfigError("circle_radius must be > 0");
  if (agent_radius <= 0.0) throw ConfigError("agent_radius must be > 0");
  if (v_pref <= 0.0) throw ConfigError("v_pref must be > 0");
  if (dt <= 0.0) throw ConfigError("dt must be > 0");
  if (time_limit <= dt) throw ConfigError("time_limit must be > dt");
  if (discomfort_dist < 0.0) throw ConfigError("discomfort_dist must be >= 0");
}

namespace {

const char* const kScenarioKeys[] = {
    "n_humans",     "n_other_robots", "circle_radius",  "agent_radius",
    "v_pref",       "dt",             "time_limit",     "discomfort_dist",
    "seed",         "ablation"};

void reject_unknown_keys(const json& doc, const char* const* allowed,
                         std::size_t n_allowed, const char* what) {
  for (const auto& [key, _] : doc.items()) {
    bool known = false;
    for (std::size_t i = 0; i < n_allowed; ++i) {
      if (key == allowed[i]) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(std::string("unknown key '") + key + "' in " + what);
    }
  }
}

}  // namespace

ScenarioConfig scenario_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("scenario config must be a JSON object");
  reject_unknown_keys(doc, kScenarioKeys, std::size(kScenarioKeys),
                      "scenario config");
  for (const char* required : {"n_humans", "n_other_robots", "ablation"}) {
    if (!doc.contains(required)) {
      throw ConfigError(std::string("scenario config missing required key '") +
                        required + "'");
    }
  }
  ScenarioConfig cfg;
  try {
    cfg.n_humans = doc.at("n_humans").get<int>();
    cfg.n_other_robots = doc.at("n_other_robots").get<int>();
    cfg.ablation = ablation_from_string(doc.at("ablation").get<std::string>());
    if (doc.contains("circle_radius"))
      cfg.circle_radius = doc.at("circle_radius").get<double>();
    if (doc.contains("agent_radius"))
      cfg.agent_radius = doc.at("agent_radius").get<double>();
    if (doc.contains("v_pref")) cfg.v_pref = doc.at("v_pref").get<double>();
    if (doc.contains("dt")) cfg.dt = doc.at("dt").get<double>();
    if (doc.contains("time_limit"))
      cfg.time_limit = doc.at("time_limit").get<double>();
    if (doc.contains("discomfort_dist"))
      cfg.discomfort_dist = doc.at("discomfort_dist").get<double>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario config type error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig scenario_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario config parse error: ") + e.what());
  }
  return scenario_from_json(doc);
}

ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str());
}

std::string scenario_to_json_text(const ScenarioConfig& cfg) {
  json doc{{"n_humans", cfg.n_humans},
           {"n_other_robots", cfg.n_other_robots},
           {"circle_radius", cfg.circle_radius},
           {"agent_radius", cfg.agent_radius},
           {"v_pref", cfg.v_pref},
           {"dt", cfg.dt},
           {"time_limit", cfg.time_limit},
           {"discomfort_dist", cfg.discomfort_dist},
           {"seed", cfg.seed},
           {"ablation", to_string(cfg.ablation)}};
  return doc.dump();
}

std::vector<AgentState> sample_circle_crossing(const ScenarioConfig& config,
                                               RngStream& rng) {
  config.validate();
  const double R = config.circle_radius;

  std::vector<AgentState> agents;
  agents.reserve(1 + config.n_humans + config.n_other_robots);

  AgentState cr;
  cr.p = {0.0, -R};
  cr.goal = {0.0, R};
  cr.v = {0.0, 0.0};
  cr.r = config.agent_radius;
  cr.v_pref = config.v_pref;
  cr.heading = wrap_angle(std::atan2(cr.goal.y - cr.p.y, cr.goal.x - cr.p.x));
  cr.kind = AgentKind::CenterRobot;
  agents.push_back(cr);

  const int n_peers = config.n_humans + config.n_other_robots;
  for (int i = 0; i < n_peers; ++i) {
    const AgentKind kind =
        i < config.n_humans ? AgentKind::Human : AgentKind::OtherRobot;
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const double base = rng.uniform(0.0, kTwoPi);
      const double d_angle = rng.uniform(-0.5, 0.5);
      const double d_radius = rng.uniform(-0.5, 0.5);
      const double rho = R + d_radius;
      const Vec2 start{rho * std::cos(base + d_angle),
                       rho * std::sin(base + d_angle)};
      bool clear = true;
      for (const AgentState& other : agents) {
        const double margin = config.agent_radius + other.r + 0.2;
        if ((start - other.p).norm() < margin) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;

      AgentState a;
      a.p = start;
      a.goal = -start;  // antipode; goal spacing then mirrors start spacing
      a.v = {0.0, 0.0};
      a.r = config.agent_radius;
      a.v_pref = config.v_pref;
      a.heading =
          wrap_angle(std::atan2(a.goal.y - a.p.y, a.goal.x - a.p.x));
      a.kind = kind;
      agents.push_back(a);
      placed = true;
    }
    if (!placed) {
      throw std::runtime_error(
          "sample_circle_crossing: no clear spot after 1000 attempts "
          "(scenario over-dense)");
    }
  }
  return agents;
}

JointObservation to_robot_frame(const std::vector<AgentState>& states) {
  const AgentState* cr = nullptr;
  for (const AgentState& s : states) {
    if (s.kind == AgentKind::CenterRobot) {
      if (cr != nullptr) {
        throw std::invalid_argument("to_robot_frame: multiple center robots");
      }
      cr = &s;
    }
  }
  if (cr == nullptr) {
    throw std::invalid_argument("to_robot_frame: no center robot");
  }

  const Vec2 to_goal = cr->goal - cr->p;
  const double d_g = to_goal.norm();
  const double axis =
      d_g > 0.0 ? std::atan2(to_goal.y, to_goal.x) : cr->heading;

  JointObservation obs;
  const Vec2 v_cr = cr->v.rotated(-axis);
  obs.cr = CenterObs{d_g,   cr->v_pref, wrap_angle_signed(cr->heading - axis),
                     cr->r, v_cr.x,     v_cr.y};

  for (const AgentState& s : states) {
    if (s.kind == AgentKind::CenterRobot) continue;
    const Vec2 rel = (s.p - cr->p).rotated(-axis);
    const Vec2 vel = s.v.rotated(-axis);
    NeighborObs n;
    n.px = rel.x;
    n.py = rel.y;
    n.vx = vel.x;
    n.vy = vel.y;
    n.r_i = s.r;
    n.d_a = (s.p - cr->p).norm();
    n.r_sum = s.r + cr->r;
    n.c = s.kind == AgentKind::Human ? 1.0 : 0.0;
    (s.kind == AgentKind::Human ? obs.humans : obs.other_robots).push_back(n);
  }
  return obs;
}

}  // namespace hetnav
