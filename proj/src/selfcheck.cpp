#include "hetnav/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "hetnav/sim.hpp"

namespace hetnav {

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

void randomize_velocities(std::vector<AgentState>& states, RngStream& rng) {
  for (AgentState& s : states) {
    const double angle = rng.uniform(0.0, kTwoPi);
    const double mag = rng.uniform(0.0, s.v_pref);
    s.v = Vec2{mag * std::cos(angle), mag * std::sin(angle)};
    if (mag > 0.0) s.heading = wrap_angle(angle);
  }
}

}  // namespace

ad::Tensor homogeneous_layer_oracle(
    const std::vector<std::pair<int, int>>& union_edges,
    const ad::Tensor& feats, const ad::Tensor& w1, const ad::Tensor& w2) {
  const int n = feats.rows;
  const int f = feats.cols;
  const int g = w1.cols;

  ad::Tensor neighbor_sum(n, f);
  for (const auto& [src, dst] : union_edges) {
    for (int j = 0; j < f; ++j) {
      neighbor_sum.at(dst, j) += feats.at(src, j);
    }
  }

  ad::Tensor out(n, g);
  for (int v = 0; v < n; ++v) {
    for (int c = 0; c < g; ++c) {
      double acc = 0.0;
      for (int j = 0; j < f; ++j) {
        acc += feats.at(v, j) * w1.at(j, c);
        acc += neighbor_sum.at(v, j) * w2.at(j, c);
      }
      out.at(v, c) = acc > 0.0 ? acc : 0.0;
    }
  }
  return out;
}

CheckReport gradient_check(int n_scenes, int min_coords, std::uint64_t seed) {
  const Stopwatch watch;
  const double h = 1e-5;
  RngStream rng(seed);
  constexpr Ablation kAblations[] = {Ablation::HeR, Ablation::HeR_nocate,
                                     Ablation::HoR, Ablation::HoR_nocate};
  const int coords_per_scene = (min_coords + n_scenes - 1) / n_scenes;

  int checked = 0;
  int failures = 0;
  double worst_dev = 0.0;
  std::ostringstream first_failure;

  for (int scene = 0; scene < n_scenes; ++scene) {
    const Ablation ablation = kAblations[scene % 4];
    const int total_agents = 1 + static_cast<int>(rng.uniform_int(8));
    const int peers = total_agents - 1;
    const int n_humans = static_cast<int>(rng.uniform_int(peers + 1));

    ScenarioConfig cfg;
    cfg.n_humans = n_humans;
    cfg.n_other_robots = peers - n_humans;
    cfg.ablation = ablation;

    std::vector<AgentState> states = sample_circle_crossing(cfg, rng);
    randomize_velocities(states, rng);
    const JointObservation obs = to_robot_frame(states);

    ModelParams params = init_params(ablation, rng);
    auto slots = params.tensors();

    ad::Tape tape;
    const StagedParams staged = stage_params(tape, params);
    const ad::NodeId out = value_graph(tape, staged, {obs});
    const std::vector<ad::Tensor> grads = tape.gradients(out, staged.all);

    for (int c = 0; c < coords_per_scene; ++c) {
      const std::size_t t = rng.uniform_int(slots.size());
      const std::size_t k = rng.uniform_int(slots[t]->size());
      const double analytic = grads[t].data[k];

      const double original = slots[t]->data[k];
      slots[t]->data[k] = original + h;
      const double v_plus = value(obs, params);
      slots[t]->data[k] = original - h;
      const double v_minus = value(obs, params);
      slots[t]->data[k] = original;
      const double fd = (v_plus - v_minus) / (2.0 * h);

      const double dev = std::fabs(analytic - fd);
      const double tol =
          1e-4 * std::max(std::fabs(analytic), std::fabs(fd)) + 1e-6;
      worst_dev = std::max(worst_dev, dev);
      if (dev > tol) {
        if (failures == 0) {
          first_failure << " first failure scene " << scene << " tensor " << t
                        << " coord " << k << ": analytic " << analytic
                        << " vs fd " << fd;
        }
        ++failures;
      }
      ++checked;
    }
  }

  CheckReport report;
  report.name = "gradient_vs_finite_differences";
  report.seconds = watch.seconds();
  report.passed = failures == 0 && checked >= min_coords;
  std::ostringstream detail;
  detail << checked << " coordinates over " << n_scenes
         << " scenes, max abs deviation " << worst_dev << ", " << failures
         << " over tolerance" << first_failure.str();
  report.detail = detail.str();
  return report;
}

CheckReport reduction_check(int n_scenes, std::uint64_t seed) {
  const Stopwatch watch;
  RngStream rng(seed);

  double worst = 0.0;
  int failures = 0;
  for (int scene = 0; scene < n_scenes; ++scene) {
    const int n = static_cast<int>(rng.uniform_int(6));
    const int m = static_cast<int>(rng.uniform_int(6));
    const int nodes = 1 + n + m;

    ad::Tensor feats(nodes, kEmbedDim);
    for (double& v : feats.data) v = rng.uniform(-1.0, 1.0);
    ad::Tensor w1(kEmbedDim, kEmbedDim), w2(kEmbedDim, kEmbedDim);
    for (double& v : w1.data) v = rng.uniform(-0.5, 0.5);
    for (double& v : w2.data) v = rng.uniform(-0.5, 0.5);

    const HetGraph het = build_het_graph(n, m, Ablation::HeR);
    GnnLayer tied;
    tied.w1.assign(kNumRelations, w1);
    tied.w2.assign(kNumRelations, w2);
    const ad::Tensor out_het = hetgnn_layer(het, feats, tied);

    std::vector<std::pair<int, int>> union_edges;
    for (const auto& rel : het.edges) {
      union_edges.insert(union_edges.end(), rel.begin(), rel.end());
    }
    const ad::Tensor oracle =
        homogeneous_layer_oracle(union_edges, feats, w1, w2);

    const HetGraph homo = build_het_graph(n, m, Ablation::HoR);
    GnnLayer single;
    single.w1.assign(1, w1);
    single.w2.assign(1, w2);
    const ad::Tensor out_homo = hetgnn_layer(homo, feats, single);

    double scene_worst = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      scene_worst = std::max(scene_worst,
                             std::fabs(out_het.data[i] - oracle.data[i]));
      scene_worst = std::max(scene_worst,
                             std::fabs(out_homo.data[i] - oracle.data[i]));
    }
    worst = std::max(worst, scene_worst);
    if (scene_worst > 1e-9) ++failures;
  }

  CheckReport report;
  report.name = "relation_tied_layer_reduces_to_homogeneous";
  report.seconds = watch.seconds();
  report.passed = failures == 0;
  std::ostringstream detail;
  detail << n_scenes << " scenes, max abs deviation " << worst << ", "
         << failures << " over 1e-9";
  report.detail = detail.str();
  return report;
}

CheckReport orca_soundness_check(int n_episodes, std::uint64_t seed) {
  const Stopwatch watch;
  ScenarioConfig cfg;
  cfg.n_humans = 5;
  cfg.n_other_robots = 2;
  cfg.ablation = Ablation::HeR;

  double worst = std::numeric_limits<double>::infinity();
  int failures = 0;
  for (int episode = 0; episode < n_episodes; ++episode) {
    RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(episode));
    const OrcaOnlyResult result = run_orca_only(cfg, rng);
    worst = std::min(worst, result.min_pair_separation);
    if (result.min_pair_separation < 0.0) ++failures;
  }

  CheckReport report;
  report.name = "orca_only_separation_nonnegative";
  report.seconds = watch.seconds();
  report.passed = failures == 0;
  std::ostringstream detail;
  detail << n_episodes << " full-visibility episodes (5 humans, 2 other "
         << "robots, center robot under the same controller), min pairwise "
         << "surface separation " << worst;
  report.detail = detail.str();
  return report;
}

std::vector<CheckReport> run_all_selfchecks() {
  return {gradient_check(), reduction_check(), orca_soundness_check()};
}

}  // namespace hetnav
