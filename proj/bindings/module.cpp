#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hetnav/metrics.hpp"
#include "hetnav/policy.hpp"
#include "hetnav/selfcheck.hpp"
#include "hetnav/trainer.hpp"

namespace py = pybind11;

namespace {

using namespace hetnav;

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["SR"] = m.sr;
  d["CR"] = m.cr;
  d["DR"] = m.dr;
  d["AT"] = m.at ? py::cast(*m.at) : py::object(py::none());
  d["MD"] = m.md ? py::cast(*m.md) : py::object(py::none());
  d["n_episodes"] = m.n_episodes;
  return d;
}

/// Python-facing episode handle: owns the scene and a policy stream.
class PyEnvironment {
 public:
  PyEnvironment(const ScenarioConfig& config, std::uint64_t seed)
      : scene_rng_(substream(seed, streams::kRollout, 0)),
        env_(config, scene_rng_) {}

  py::tuple step(double speed, double heading) {
    const StepResult r = env_.step(Action{speed, heading});
    return py::make_tuple(r.reward, std::string(to_string(r.event.kind)),
                          r.done);
  }

  const std::vector<AgentState>& agents() const { return env_.agents(); }
  double t() const { return env_.t(); }
  int steps() const { return env_.steps(); }
  bool done() const { return env_.done(); }
  std::string outcome() const { return to_string(env_.outcome()); }

  const Environment& env() const { return env_; }

 private:
  RngStream scene_rng_;
  Environment env_;
};

}  // namespace

PYBIND11_MODULE(_hetnav, m) {
  m.doc() =
      "Circle-crossing crowd navigation: simulator, relational value model "
      "and the training/evaluation loops";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Vec2>(m, "Vec2")
      .def(py::init<>())
      .def(py::init<double, double>(), py::arg("x"), py::arg("y"))
      .def_readwrite("x", &Vec2::x)
      .def_readwrite("y", &Vec2::y)
      .def("__repr__", [](const Vec2& v) {
        std::ostringstream out;
        out << "Vec2(" << v.x << ", " << v.y << ")";
        return out.str();
      });

  py::class_<AgentState>(m, "AgentState")
      .def(py::init<>())
      .def_readwrite("p", &AgentState::p)
      .def_readwrite("v", &AgentState::v)
      .def_readwrite("r", &AgentState::r)
      .def_readwrite("goal", &AgentState::goal)
      .def_readwrite("v_pref", &AgentState::v_pref)
      .def_readwrite("heading", &AgentState::heading)
      .def_property_readonly(
          "kind", [](const AgentState& s) { return to_string(s.kind); })
      .def("dist_to_goal", &AgentState::dist_to_goal);

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("n_humans", &ScenarioConfig::n_humans)
      .def_readwrite("n_other_robots", &ScenarioConfig::n_other_robots)
      .def_readwrite("circle_radius", &ScenarioConfig::circle_radius)
      .def_readwrite("agent_radius", &ScenarioConfig::agent_radius)
      .def_readwrite("v_pref", &ScenarioConfig::v_pref)
      .def_readwrite("dt", &ScenarioConfig::dt)
      .def_readwrite("time_limit", &ScenarioConfig::time_limit)
      .def_readwrite("discomfort_dist", &ScenarioConfig::discomfort_dist)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_property(
          "ablation",
          [](const ScenarioConfig& c) { return to_string(c.ablation); },
          [](ScenarioConfig& c, const std::string& name) {
            c.ablation = ablation_from_string(name);
          })
      .def("validate", &ScenarioConfig::validate)
      .def_static("from_json", &scenario_from_json_text, py::arg("text"))
      .def("to_json", [](const ScenarioConfig& c) {
        return scenario_to_json_text(c);
      });

  py::class_<PyEnvironment>(m, "Environment")
      .def(py::init<const ScenarioConfig&, std::uint64_t>(), py::arg("config"),
           py::arg("seed") = 0,
           "A fresh episode sampled deterministically from (config, seed)")
      .def("step", &PyEnvironment::step, py::arg("speed"), py::arg("heading"),
           "Advance one tick; returns (reward, event, done)")
      .def_property_readonly("agents", &PyEnvironment::agents)
      .def_property_readonly("t", &PyEnvironment::t)
      .def_property_readonly("steps", &PyEnvironment::steps)
      .def_property_readonly("done", &PyEnvironment::done)
      .def_property_readonly("outcome", &PyEnvironment::outcome);

  py::class_<ModelParams>(m, "ModelParams")
      .def_property_readonly(
          "ablation", [](const ModelParams& p) { return to_string(p.ablation); })
      .def("save", &save_checkpoint, py::arg("path"));

  m.def("action_space",
        [](double v_pref) {
          std::vector<std::pair<double, double>> out;
          for (const Action& a : action_space(v_pref).actions) {
            out.emplace_back(a.speed, a.heading);
          }
          return out;
        },
        py::arg("v_pref"), "The 80 (speed, heading) pairs, speed-major");

  m.def("init_params",
        [](const std::string& ablation, std::uint64_t seed) {
          RngStream rng = substream(seed, streams::kParamInit, 0);
          return init_params(ablation_from_string(ablation), rng);
        },
        py::arg("ablation"), py::arg("seed") = 0);

  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def("value",
        [](const ModelParams& params, const std::vector<AgentState>& agents) {
          return value(to_robot_frame(agents), params);
        },
        py::arg("params"), py::arg("agents"),
        "State value of a world-frame scene (index 0: center robot)");

  m.def("greedy_action",
        [](const ModelParams& params, const PyEnvironment& env, double gamma) {
          const ActionSpace space =
              action_space(env.env().agents()[0].v_pref);
          RngStream unused(0);
          const ActionChoice c =
              select_action(env.env().agents(), params, space, 0.0, gamma,
                            env.env().config(), unused);
          return py::make_tuple(c.action.speed, c.action.heading, c.index);
        },
        py::arg("params"), py::arg("env"), py::arg("gamma") = 0.9,
        "One-step-lookahead greedy (speed, heading, index) for the "
        "environment's current scene");

  m.def("evaluate",
        [](const ModelParams& params, const ScenarioConfig& scenario,
           int n_episodes, std::uint64_t seed) {
          return metrics_dict(
              evaluate(params, scenario, n_episodes, seed).metrics);
        },
        py::arg("params"), py::arg("scenario"), py::arg("n_episodes") = 500,
        py::arg("seed") = 0);

  m.def("evaluate_random",
        [](const ScenarioConfig& scenario, int n_episodes, std::uint64_t seed) {
          return metrics_dict(
              evaluate_random(scenario, n_episodes, seed).metrics);
        },
        py::arg("scenario"), py::arg("n_episodes") = 500, py::arg("seed") = 0);

  m.def("run_training",
        [](const std::string& job_json, const std::string& out_dir) {
          const TrainJob job = train_job_from_json_text(job_json);
          const TrainingResult r =
              run_training(job.train, job.scenario, out_dir);
          py::dict d;
          d["episodes"] = r.episodes_run;
          d["final_checkpoint"] = r.final_checkpoint_path;
          d["log"] = r.log_path;
          return d;
        },
        py::arg("job_json"), py::arg("out_dir"),
        "Run a {'train': ..., 'scenario': ...} job; returns output paths");

  m.def("run_selfchecks", [] {
    py::list out;
    for (const CheckReport& r : run_all_selfchecks()) {
      py::dict d;
      d["name"] = r.name;
      d["passed"] = r.passed;
      d["detail"] = r.detail;
      d["seconds"] = r.seconds;
      out.append(d);
    }
    return out;
  });
}
