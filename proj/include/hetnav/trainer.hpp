#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hetnav/policy.hpp"

namespace hetnav {

struct Transition {
  JointObservation obs;
  double reward = 0.0;
  JointObservation next_obs;
  bool done = false;
};

/// Bounded FIFO of transitions with strictly oldest-first eviction. Each
/// physical slot carries a cache of the target network's value for its
/// next_obs, tagged with the target version that produced it; pushes clear
/// the overwritten slot's cache.
class ReplayBuffer {
 public:
  struct CachedTarget {
    long long version = -1;
    double value = 0.0;
  };

  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }

  void push(Transition t);

  /// index 0 is the oldest stored transition.
  const Transition& operator[](std::size_t index) const;
  CachedTarget& target_cache(std::size_t index);

  /// k uniform indices, drawn with replacement.
  std::vector<std::size_t> sample(std::size_t k, RngStream& rng) const;

 private:
  struct Entry {
    Transition transition;
    CachedTarget cache;
  };

  std::size_t physical(std::size_t index) const {
    return (head_ + index) % capacity_;
  }

  std::size_t capacity_;
  std::size_t head_ = 0;  // physical slot of the oldest entry
  std::vector<Entry> entries_;
};

struct TrainConfig {
  int episodes = 10000;
  int batch_size = 100;
  double gamma = 0.9;
  double lr = 1e-3;
  double epsilon_start = 0.5;
  double epsilon_end = 0.1;
  int epsilon_decay_episodes = 4000;
  int target_sync_every = 50;
  /// 0 means one gradient step per environment step; a positive value means
  /// that many steps after each episode instead.
  int updates_per_episode = 0;
  std::size_t replay_capacity = 100000;
  int warmup_transitions = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A complete training job: the optimizer settings plus the scenario to
/// sample episodes from. Parsed from {"train": {...}, "scenario": {...}}.
struct TrainJob {
  TrainConfig train;
  ScenarioConfig scenario;
};

TrainJob train_job_from_json_text(const std::string& text);
TrainJob load_train_job(const std::string& path);
std::string train_config_to_json_text(const TrainConfig& cfg);

/// Linear decay from epsilon_start to epsilon_end over the first
/// epsilon_decay_episodes episodes, constant afterwards.
double epsilon_schedule(int episode, const TrainConfig& cfg);

/// y_i = r_i for terminal transitions, else r_i + gamma * V_target(next_obs).
std::vector<double> bellman_target(const std::vector<Transition>& batch,
                                   const ModelParams& target_params,
                                   double gamma);

struct TrainStepResult {
  bool updated = false;
  double loss = 0.0;
};

/// One optimization step: sample a batch, form targets against the target
/// network (reusing per-slot caches valid for target_version), minimize the
/// mean squared value error with Adam. No-op while the buffer holds fewer
/// than batch_size transitions. Throws on a non-finite loss.
TrainStepResult train_step(ModelParams& params,
                           const ModelParams& target_params,
                           long long target_version, ReplayBuffer& buffer,
                           ad::AdamState& adam, const TrainConfig& cfg,
                           RngStream& rng);

struct TrainingResult {
  ModelParams params;
  std::string log_path;
  std::string final_checkpoint_path;
  int episodes_run = 0;
};

/// The episode loop: epsilon-greedy rollouts feeding the replay buffer, a
/// gradient step per environment step (after warm-up), hard target sync
/// every target_sync_every episodes, a JSON-lines log record per episode and
/// checkpoints every 1000 episodes plus one at the end. Bit-for-bit
/// reproducible from (cfg, scenario). `progress`, when given, receives a
/// short line every few hundred episodes.
TrainingResult run_training(const TrainConfig& cfg,
                            const ScenarioConfig& scenario,
                            const std::string& out_dir,
                            std::ostream* progress = nullptr);

}  // namespace hetnav
