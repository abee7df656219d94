#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hetnav/policy.hpp"

namespace hetnav {

/// Everything a metric needs from one evaluation episode.
struct EpisodeRecord {
  EventKind outcome = EventKind::Timeout;
  double duration = 0.0;
  std::vector<double> min_separations;  // one entry per step
};

/// The five navigation quality measures over an episode suite:
///   SR  success rate,
///   CR  collision rate,
///   AT  mean arrival time over successful episodes (absent without any),
///   DR  mean per-episode fraction of steps spent inside the discomfort band,
///   MD  mean over risk episodes of the episode's minimum separation within
///       the discomfort band (absent without risk episodes).
struct Metrics {
  double sr = 0.0;
  double cr = 0.0;
  double dr = 0.0;
  std::optional<double> at;
  std::optional<double> md;
  int n_episodes = 0;
};

Metrics compute_metrics(const std::vector<EpisodeRecord>& records,
                        double discomfort_dist);

/// Report JSON with exactly the keys SR, CR, DR, AT, MD, n_episodes; AT and
/// MD are omitted when undefined.
std::string metrics_to_json_text(const Metrics& m);

struct EvalResult {
  Metrics metrics;
  std::vector<EpisodeRecord> records;
};

/// Greedy policy over n_episodes deterministically seeded scenes. The seed
/// is namespaced, so a given base seed never replays training scenes.
/// gamma is the lookahead discount of the greedy policy. Throws ConfigError
/// when the params' ablation disagrees with the scenario's.
EvalResult evaluate(const ModelParams& params, const ScenarioConfig& scenario,
                    int n_episodes, std::uint64_t seed, double gamma = 0.9);

/// Uniform-random action baseline over the same episode seeds.
EvalResult evaluate_random(const ScenarioConfig& scenario, int n_episodes,
                           std::uint64_t seed);

}  // namespace hetnav
