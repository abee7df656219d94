#include "hetnav/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace hetnav {

Metrics compute_metrics(const std::vector<EpisodeRecord>& records,
                        double discomfort_dist) {
  if (records.empty()) {
    throw std::invalid_argument("compute_metrics: no records");
  }

  Metrics m;
  m.n_episodes = static_cast<int>(records.size());

  int successes = 0, collisions = 0;
  double duration_sum = 0.0;
  double dr_sum = 0.0;
  double md_sum = 0.0;
  int risk_episodes = 0;

  for (const EpisodeRecord& rec : records) {
    if (rec.outcome == EventKind::ReachedGoal) {
      ++successes;
      duration_sum += rec.duration;
    } else if (rec.outcome == EventKind::Collision) {
      ++collisions;
    } else if (rec.outcome != EventKind::Timeout) {
      throw std::invalid_argument(
          "compute_metrics: episode outcome must be terminal");
    }

    int discomfort_steps = 0;
    double episode_md = std::numeric_limits<double>::infinity();
    for (double sep : rec.min_separations) {
      if (sep >= 0.0 && sep < discomfort_dist) {
        ++discomfort_steps;
        episode_md = std::min(episode_md, sep);
      }
    }
    if (!rec.min_separations.empty()) {
      dr_sum += static_cast<double>(discomfort_steps) /
                static_cast<double>(rec.min_separations.size());
    }
    if (discomfort_steps > 0) {
      ++risk_episodes;
      md_sum += episode_md;
    }
  }

  m.sr = static_cast<double>(successes) / m.n_episodes;
  m.cr = static_cast<double>(collisions) / m.n_episodes;
  m.dr = dr_sum / m.n_episodes;
  if (successes > 0) m.at = duration_sum / successes;
  if (risk_episodes > 0) m.md = md_sum / risk_episodes;
  return m;
}

std::string metrics_to_json_text(const Metrics& m) {
  nlohmann::json doc;
  doc["SR"] = m.sr;
  doc["CR"] = m.cr;
  doc["DR"] = m.dr;
  if (m.at.has_value()) doc["AT"] = *m.at;
  if (m.md.has_value()) doc["MD"] = *m.md;
  doc["n_episodes"] = m.n_episodes;
  return doc.dump();
}

namespace {

EvalResult run_suite(const ModelParams* params, const ScenarioConfig& scenario,
                     int n_episodes, std::uint64_t seed, double gamma) {
  if (n_episodes <= 0) {
    throw std::invalid_argument("evaluate: n_episodes must be > 0");
  }
  const ActionSpace space = action_space(scenario.v_pref);

  EvalResult result;
  result.records.reserve(n_episodes);
  for (int i = 0; i < n_episodes; ++i) {
    RngStream scene_rng = substream(seed, streams::kEvalScenario,
                                    static_cast<std::uint64_t>(i));
    Environment env(scenario, scene_rng);
    // The random baseline draws actions from the same per-episode stream
    // that would otherwise go unused by the greedy policy.
    EpisodeRecord rec;
    while (!env.done()) {
      Action action;
      if (params != nullptr) {
        action = select_action(env.agents(), *params, space, 0.0, gamma,
                               scenario, scene_rng)
                     .action;
      } else {
        action = space[static_cast<int>(scene_rng.uniform_int(space.size()))];
      }
      const StepResult res = env.step(action);
      rec.min_separations.push_back(res.event.min_separation);
    }
    rec.outcome = env.outcome();
    rec.duration = env.t();
    result.records.push_back(std::move(rec));
  }
  result.metrics = compute_metrics(result.records, scenario.discomfort_dist);
  return result;
}

}  // namespace

EvalResult evaluate(const ModelParams& params, const ScenarioConfig& scenario,
                    int n_episodes, std::uint64_t seed, double gamma) {
  if (params.ablation != scenario.ablation) {
    const ModelParams expected = make_zero_params(scenario.ablation);
    throw ConfigError(
        std::string("checkpoint ablation ") + to_string(params.ablation) +
        " does not match scenario ablation " + to_string(scenario.ablation) +
        " (neighbor input dim " + std::to_string(params.neighbor_input_dim()) +
        " vs expected " + std::to_string(expected.neighbor_input_dim()) +
        ", relations " + std::to_string(params.n_relations()) +
        " vs expected " + std::to_string(expected.n_relations()) + ")");
  }
  return run_suite(&params, scenario, n_episodes, seed, gamma);
}

EvalResult evaluate_random(const ScenarioConfig& scenario, int n_episodes,
                           std::uint64_t seed) {
  return run_suite(nullptr, scenario, n_episodes, seed, 0.0);
}

}  // namespace hetnav
