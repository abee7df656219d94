// Release gates for the crowd navigation stack, one line of output per
// criterion. Most gates are instant; the determinism and learning gates
// train small models and together take around ten minutes. The process
// exits nonzero when any gating criterion fails; the full-scale benchmark
// gate is skipped unless HETNAV_FULL_CKPT points at a checkpoint from the
// 15000-episode configuration.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "hetnav/metrics.hpp"
#include "hetnav/selfcheck.hpp"
#include "hetnav/trainer.hpp"

namespace {

using namespace hetnav;

struct Gate {
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

std::string fmt(const char* format, ...) {
  char buffer[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buffer, sizeof buffer, format, args);
  va_end(args);
  return buffer;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::filesystem::path scratch_dir(const std::string& leaf) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(dir);
  return dir;
}

Gate from_report(const CheckReport& report) {
  Gate gate;
  gate.passed = report.passed;
  gate.detail = report.detail;
  return gate;
}

// --- value gradients against central finite differences -------------------

Gate check_gradients() {
  const CheckReport report = gradient_check();
  Gate gate = from_report(report);
  gate.detail += fmt("; %.1f s (budget 60 s)", report.seconds);
  gate.passed = gate.passed && report.seconds < 60.0;
  return gate;
}

// --- relation-tied layers against the plain homogeneous oracle ------------

Gate check_reduction() { return from_report(reduction_check()); }

// --- value() under neighbor reorderings -----------------------------------

void shuffle_neighbors(std::vector<NeighborObs>& rows, RngStream& rng) {
  for (std::size_t i = rows.size(); i > 1; --i) {
    std::swap(rows[i - 1], rows[rng.uniform_int(i)]);
  }
}

Gate check_permutation_invariance() {
  constexpr double kTol = 1e-9;
  constexpr int kScenes = 10;
  constexpr int kPermutations = 100;

  RngStream rng(0x7065726dULL);
  double worst = 0.0;
  int scenes = 0;
  for (Ablation ablation : {Ablation::HeR, Ablation::HeR_nocate, Ablation::HoR,
                            Ablation::HoR_nocate}) {
    const ModelParams params = init_params(ablation, rng);
    for (int scene = 0; scene < kScenes; ++scene) {
      ScenarioConfig config;
      config.n_humans = 1 + scene % 5;
      config.n_other_robots = scene % 4;
      config.ablation = ablation;
      std::vector<AgentState> states = sample_circle_crossing(config, rng);
      for (AgentState& s : states) {
        s.v = Vec2{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      }
      const JointObservation obs = to_robot_frame(states);
      const double base = value(obs, params);
      for (int p = 0; p < kPermutations; ++p) {
        JointObservation shuffled = obs;
        shuffle_neighbors(shuffled.humans, rng);
        shuffle_neighbors(shuffled.other_robots, rng);
        worst = std::max(worst, std::abs(value(shuffled, params) - base));
      }
      ++scenes;
    }
  }

  Gate gate;
  gate.passed = worst <= kTol;
  gate.detail = fmt(
      "worst |dV| %.3g over %d scenes x %d neighbor permutations (tol %g)",
      worst, scenes, kPermutations, kTol);
  return gate;
}

// --- discrete action set layout -------------------------------------------

Gate check_action_space() {
  constexpr double kVPref = 1.0;
  const ActionSpace space = action_space(kVPref);

  Gate gate;
  if (space.size() != 80) {
    gate.detail = fmt("expected 80 actions, got %d", space.size());
    return gate;
  }

  std::vector<double> speeds;
  for (int s = 0; s < 5; ++s) speeds.push_back(space[s * 16].speed);

  bool speeds_ok = speeds.back() == kVPref;
  for (int s = 1; s < 5; ++s) speeds_ok = speeds_ok && speeds[s] > speeds[s - 1];

  bool layout_ok = true;
  double worst_spacing = 0.0;
  for (int s = 0; s < 5; ++s) {
    for (int j = 0; j < 16; ++j) {
      const Action& a = space[s * 16 + j];
      layout_ok = layout_ok && a.speed == speeds[s];
      const double want = kTwoPi * j / 16.0;
      worst_spacing = std::max(worst_spacing, std::abs(a.heading - want));
    }
  }

  gate.passed = speeds_ok && layout_ok && worst_spacing <= 1e-12;
  gate.detail = fmt(
      "80 actions, 5 speeds (max %.3f, strictly increasing: %s), 16 headings "
      "at pi/8 (worst offset %.3g)",
      speeds.back(), speeds_ok ? "yes" : "no", worst_spacing);
  return gate;
}

// --- reciprocal avoidance keeps agents apart ------------------------------

Gate check_orca_soundness() { return from_report(orca_soundness_check()); }

// --- metrics against hand-computed suites ---------------------------------

EpisodeRecord episode(EventKind outcome, double duration,
                      std::vector<double> seps) {
  EpisodeRecord rec;
  rec.outcome = outcome;
  rec.duration = duration;
  rec.min_separations = std::move(seps);
  return rec;
}

Gate check_metrics_oracle() {
  struct Suite {
    const char* name;
    std::vector<EpisodeRecord> records;
    double sr, cr, dr;
    std::optional<double> at, md;
  };

  std::vector<Suite> suites;
  {
    // Nine clean successes and one collision.
    std::vector<EpisodeRecord> recs(
        9, episode(EventKind::ReachedGoal, 10.0, {1.0, 1.0}));
    recs.push_back(episode(EventKind::Collision, 4.0, {1.0, -0.05}));
    suites.push_back({"9 success + 1 collision", recs, 0.9, 0.1, 0.0, 10.0,
                      std::nullopt});
  }
  suites.push_back({"all success, no risk",
                    {episode(EventKind::ReachedGoal, 8.0, {0.5, 0.4, 0.9}),
                     episode(EventKind::ReachedGoal, 12.0, {2.0, 0.21})},
                    1.0, 0.0, 0.0, 10.0, std::nullopt});
  suites.push_back(
      {"one banded step in ten",
       {episode(EventKind::ReachedGoal, 10.0,
                {0.5, 0.12, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}),
        episode(EventKind::Timeout, 25.0, {0.9, 0.9})},
       0.5, 0.0, 0.1 / 2.0, 10.0, 0.12});
  suites.push_back(
      // The collision step's negative separation must stay out of the band.
      {"mixed outcomes, negative separation excluded",
       {episode(EventKind::Collision, 3.0, {0.5, 0.15, -0.02}),
        episode(EventKind::ReachedGoal, 9.0, {0.5, 0.05, 0.10}),
        episode(EventKind::ReachedGoal, 11.0, {0.5, 0.5})},
       2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 10.0, 0.1});
  suites.push_back({"all timeout",
                    std::vector<EpisodeRecord>(
                        4, episode(EventKind::Timeout, 25.0, {1.0})),
                    0.0, 0.0, 0.0, std::nullopt, std::nullopt});

  Gate gate;
  gate.passed = true;
  for (const Suite& suite : suites) {
    const Metrics m = compute_metrics(suite.records, 0.2);
    int timeouts = 0;
    for (const EpisodeRecord& rec : suite.records) {
      if (rec.outcome == EventKind::Timeout) ++timeouts;
    }
    const double timeout_rate =
        static_cast<double>(timeouts) / suite.records.size();
    const bool ok = m.sr == suite.sr && m.cr == suite.cr && m.dr == suite.dr &&
                    m.at == suite.at && m.md == suite.md &&
                    m.sr + m.cr + timeout_rate == 1.0;
    if (!ok) {
      gate.passed = false;
      gate.detail += fmt("[%s: got SR %.17g CR %.17g DR %.17g] ", suite.name,
                         m.sr, m.cr, m.dr);
    }
  }
  if (gate.passed) {
    gate.detail = fmt(
        "%zu hand-computed suites exact (SR/CR/AT/DR/MD), SR+CR+timeout == 1 "
        "on each",
        suites.size());
  }
  return gate;
}

// --- bit-identical training reruns ----------------------------------------

Gate check_determinism() {
  TrainConfig cfg;
  cfg.episodes = 200;
  cfg.epsilon_decay_episodes = 400;
  cfg.warmup_transitions = 500;  // updates begin well inside 200 episodes
  cfg.seed = 3;

  ScenarioConfig scenario;
  scenario.n_humans = 2;
  scenario.n_other_robots = 1;

  const auto start = std::chrono::steady_clock::now();
  const std::filesystem::path dir_a = scratch_dir("hetnav_accept_det_a");
  const std::filesystem::path dir_b = scratch_dir("hetnav_accept_det_b");
  const TrainingResult a = run_training(cfg, scenario, dir_a.string());
  const TrainingResult b = run_training(cfg, scenario, dir_b.string());

  const std::string log_a = slurp(a.log_path);
  const std::string ckpt_a = slurp(a.final_checkpoint_path);

  Gate gate;
  gate.passed = !log_a.empty() && !ckpt_a.empty() &&
                log_a == slurp(b.log_path) &&
                ckpt_a == slurp(b.final_checkpoint_path);
  gate.detail =
      fmt("200-episode 2H1O run twice, seed %llu: log (%zu bytes) and "
          "checkpoint (%zu bytes) %s; %.0f s",
          static_cast<unsigned long long>(cfg.seed), log_a.size(),
          ckpt_a.size(), gate.passed ? "bit-identical" : "DIFFER",
          seconds_since(start));
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
  return gate;
}

// --- a small model must beat random after ten minutes of training ---------

Gate check_learning() {
  // Mirrors configs/train_smoke_2h1o.json.
  TrainConfig cfg;
  cfg.episodes = 1000;
  cfg.epsilon_decay_episodes = 400;
  cfg.seed = 0;

  ScenarioConfig scenario;
  scenario.n_humans = 2;
  scenario.n_other_robots = 1;

  const auto start = std::chrono::steady_clock::now();
  const std::filesystem::path dir = scratch_dir("hetnav_accept_learn");
  const TrainingResult trained = run_training(cfg, scenario, dir.string());
  const double train_seconds = seconds_since(start);

  // Evaluation seeds live in their own stream namespace, so these 100
  // episodes are disjoint from every training scene.
  const EvalResult greedy = evaluate(trained.params, scenario, 100, 7);
  const EvalResult random = evaluate_random(scenario, 100, 7);

  Gate gate;
  gate.passed = greedy.metrics.sr >= 0.6 &&
                greedy.metrics.sr > random.metrics.sr;
  gate.detail = fmt(
      "1000-episode 2H1O training: greedy SR %.2f (gate >= 0.60) vs random "
      "SR %.2f on 100 held-out episodes; trained in %.0f s (target 600 s%s)",
      greedy.metrics.sr, random.metrics.sr, train_seconds,
      train_seconds <= 600.0 ? ", met" : ", missed, non-gating");
  std::filesystem::remove_all(dir);
  return gate;
}

// --- full-scale benchmark, only with a fully trained checkpoint -----------

Gate check_full_scale() {
  Gate gate;
  const char* ckpt_path = std::getenv("HETNAV_FULL_CKPT");
  if (ckpt_path == nullptr) {
    gate.skipped = true;
    gate.detail =
        "needs a full 15000-episode run (configs/train_5h2o.json); set "
        "HETNAV_FULL_CKPT to its checkpoint to evaluate the soft target "
        "SR >= 0.90 on 5H2O";
    return gate;
  }

  const ModelParams params = load_checkpoint(ckpt_path);
  ScenarioConfig scenario;
  scenario.n_humans = 5;
  scenario.n_other_robots = 2;
  scenario.ablation = params.ablation;
  const EvalResult result = evaluate(params, scenario, 500, 2026);

  gate.passed = result.metrics.sr >= 0.90;
  gate.detail = fmt("SR %.3f over 500 5H2O episodes (soft target >= 0.90)",
                    result.metrics.sr);

  const char* hor_path = std::getenv("HETNAV_FULL_CKPT_HOR");
  if (hor_path != nullptr) {
    const ModelParams hor = load_checkpoint(hor_path);
    scenario.ablation = hor.ablation;
    const EvalResult hor_result = evaluate(hor, scenario, 500, 2026);
    gate.detail += fmt("; relation-typed SR %.3f vs collapsed SR %.3f "
                       "(ordering reported, non-gating)",
                       result.metrics.sr, hor_result.metrics.sr);
  }
  return gate;
}

}  // namespace

int main() {
#if defined(__GLIBC__)
  // Same tuning as the CLI: the training gates allocate and free ~100 KB
  // tensor blocks millions of times.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif

  const std::vector<std::pair<const char*, std::function<Gate()>>> gates = {
      {"gradient_check", check_gradients},
      {"homogeneous_reduction", check_reduction},
      {"permutation_invariance", check_permutation_invariance},
      {"action_space", check_action_space},
      {"orca_soundness", check_orca_soundness},
      {"metrics_oracle", check_metrics_oracle},
      {"training_determinism", check_determinism},
      {"learning_smoke", check_learning},
      {"full_scale_benchmark", check_full_scale},
  };

  int failures = 0;
  for (const auto& [name, run] : gates) {
    Gate gate;
    try {
      gate = run();
    } catch (const std::exception& e) {
      gate.detail = fmt("threw %s", e.what());
    }
    const char* verdict = gate.skipped ? "SKIP" : gate.passed ? "PASS" : "FAIL";
    std::printf("%s %s: %s\n", verdict, name, gate.detail.c_str());
    std::fflush(stdout);
    if (!gate.skipped && !gate.passed) ++failures;
  }

  if (failures > 0) {
    std::printf("%d of %zu gates failed\n", failures, gates.size());
    return 1;
  }
  std::printf("all gates passed\n");
  return 0;
}
