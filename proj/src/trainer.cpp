#include "hetnav/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace hetnav {

using nlohmann::json;

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) {
    throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }
}

void ReplayBuffer::push(Transition t) {
  if (entries_.size() < capacity_) {
    entries_.push_back(Entry{std::move(t), {}});
  } else {
    entries_[head_] = Entry{std::move(t), {}};
    head_ = (head_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::operator[](std::size_t index) const {
  if (index >= entries_.size()) {
    throw std::out_of_range("ReplayBuffer: index out of range");
  }
  return entries_[physical(index)].transition;
}

ReplayBuffer::CachedTarget& ReplayBuffer::target_cache(std::size_t index) {
  if (index >= entries_.size()) {
    throw std::out_of_range("ReplayBuffer: index out of range");
  }
  return entries_[physical(index)].cache;
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t k,
                                              RngStream& rng) const {
  if (entries_.empty()) {
    throw std::logic_error("ReplayBuffer: cannot sample from empty buffer");
  }
  std::vector<std::size_t> indices(k);
  for (std::size_t& i : indices) i = rng.uniform_int(entries_.size());
  return indices;
}

void TrainConfig::validate() const {
  if (episodes < 0) throw ConfigError("episodes must be >= 0");
  if (batch_size <= 0) throw ConfigError("batch_size must be > 0");
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0, 1]");
  if (lr <= 0.0) throw ConfigError("lr must be > 0");
  if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 ||
      epsilon_end > 1.0) {
    throw ConfigError("epsilon bounds must be in [0, 1]");
  }
  if (epsilon_end > epsilon_start) {
    throw ConfigError("epsilon_end must be <= epsilon_start");
  }
  if (epsilon_decay_episodes <= 0) {
    throw ConfigError("epsilon_decay_episodes must be > 0");
  }
  if (target_sync_every <= 0) throw ConfigError("target_sync_every must be > 0");
  if (updates_per_episode < 0) {
    throw ConfigError("updates_per_episode must be >= 0");
  }
  if (replay_capacity == 0) throw ConfigError("replay_capacity must be > 0");
  if (warmup_transitions < 0) throw ConfigError("warmup_transitions must be >= 0");
}

namespace {

const char* const kTrainKeys[] = {
    "episodes",        "batch_size",        "gamma",
    "lr",              "epsilon_start",     "epsilon_end",
    "epsilon_decay_episodes", "target_sync_every", "updates_per_episode",
    "replay_capacity", "warmup_transitions", "seed"};

TrainConfig train_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    bool known = false;
    for (const char* allowed : kTrainKeys) {
      if (key == allowed) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown key '" + key + "' in train config");
  }
  TrainConfig cfg;
  try {
    if (doc.contains("episodes")) cfg.episodes = doc.at("episodes").get<int>();
    if (doc.contains("batch_size"))
      cfg.batch_size = doc.at("batch_size").get<int>();
    if (doc.contains("gamma")) cfg.gamma = doc.at("gamma").get<double>();
    if (doc.contains("lr")) cfg.lr = doc.at("lr").get<double>();
    if (doc.contains("epsilon_start"))
      cfg.epsilon_start = doc.at("epsilon_start").get<double>();
    if (doc.contains("epsilon_end"))
      cfg.epsilon_end = doc.at("epsilon_end").get<double>();
    if (doc.contains("epsilon_decay_episodes"))
      cfg.epsilon_decay_episodes = doc.at("epsilon_decay_episodes").get<int>();
    if (doc.contains("target_sync_every"))
      cfg.target_sync_every = doc.at("target_sync_every").get<int>();
    if (doc.contains("updates_per_episode"))
      cfg.updates_per_episode = doc.at("updates_per_episode").get<int>();
    if (doc.contains("replay_capacity"))
      cfg.replay_capacity = doc.at("replay_capacity").get<std::size_t>();
    if (doc.contains("warmup_transitions"))
      cfg.warmup_transitions = doc.at("warmup_transitions").get<int>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config type error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace

TrainJob train_job_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train job parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("train job must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "train" && key != "scenario") {
      throw ConfigError("unknown key '" + key + "' in train job");
    }
  }
  if (!doc.contains("train") || !doc.contains("scenario")) {
    throw ConfigError("train job needs both 'train' and 'scenario' sections");
  }
  TrainJob job;
  job.train = train_config_from_json(doc.at("train"));
  job.scenario = scenario_from_json_text(doc.at("scenario").dump());
  return job;
}

TrainJob load_train_job(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open train config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return train_job_from_json_text(buf.str());
}

std::string train_config_to_json_text(const TrainConfig& cfg) {
  json doc{{"episodes", cfg.episodes},
           {"batch_size", cfg.batch_size},
           {"gamma", cfg.gamma},
           {"lr", cfg.lr},
           {"epsilon_start", cfg.epsilon_start},
           {"epsilon_end", cfg.epsilon_end},
           {"epsilon_decay_episodes", cfg.epsilon_decay_episodes},
           {"target_sync_every", cfg.target_sync_every},
           {"updates_per_episode", cfg.updates_per_episode},
           {"replay_capacity", cfg.replay_capacity},
           {"warmup_transitions", cfg.warmup_transitions},
           {"seed", cfg.seed}};
  return doc.dump();
}

double epsilon_schedule(int episode, const TrainConfig& cfg) {
  if (episode < 0) throw std::invalid_argument("epsilon_schedule: episode < 0");
  if (episode >= cfg.epsilon_decay_episodes) return cfg.epsilon_end;
  const double f =
      static_cast<double>(episode) / cfg.epsilon_decay_episodes;
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * f;
}

std::vector<double> bellman_target(const std::vector<Transition>& batch,
                                   const ModelParams& target_params,
                                   double gamma) {
  if (batch.empty()) {
    throw std::invalid_argument("bellman_target: empty batch");
  }
  std::vector<JointObservation> bootstrap_obs;
  for (const Transition& t : batch) {
    if (!t.done) bootstrap_obs.push_back(t.next_obs);
  }
  std::vector<double> values;
  if (!bootstrap_obs.empty()) {
    values = value_batch(bootstrap_obs, target_params);
  }
  std::vector<double> targets;
  targets.reserve(batch.size());
  std::size_t at = 0;
  for (const Transition& t : batch) {
    targets.push_back(t.done ? t.reward : t.reward + gamma * values[at++]);
  }
  return targets;
}

TrainStepResult train_step(ModelParams& params,
                           const ModelParams& target_params,
                           long long target_version, ReplayBuffer& buffer,
                           ad::AdamState& adam, const TrainConfig& cfg,
                           RngStream& rng) {
  if (buffer.size() < static_cast<std::size_t>(cfg.batch_size)) {
    return TrainStepResult{};
  }
  const std::vector<std::size_t> indices =
      buffer.sample(static_cast<std::size_t>(cfg.batch_size), rng);

  // Refresh stale target-value caches in one batched pass.
  std::vector<std::size_t> misses;
  std::vector<JointObservation> miss_obs;
  for (std::size_t idx : indices) {
    const Transition& t = buffer[idx];
    if (t.done) continue;
    if (buffer.target_cache(idx).version != target_version) {
      misses.push_back(idx);
      miss_obs.push_back(t.next_obs);
    }
  }
  if (!misses.empty()) {
    const std::vector<double> values = value_batch(miss_obs, target_params);
    for (std::size_t i = 0; i < misses.size(); ++i) {
      buffer.target_cache(misses[i]) =
          ReplayBuffer::CachedTarget{target_version, values[i]};
    }
  }

  const int B = cfg.batch_size;
  ad::Tensor targets(B, 1);
  std::vector<JointObservation> obs_batch;
  obs_batch.reserve(indices.size());
  for (int i = 0; i < B; ++i) {
    const Transition& t = buffer[indices[i]];
    targets.at(i, 0) =
        t.done ? t.reward
               : t.reward + cfg.gamma * buffer.target_cache(indices[i]).value;
    obs_batch.push_back(t.obs);
  }

  ad::Tape tape;
  const StagedParams staged = stage_params(tape, params);
  const ad::NodeId preds = value_graph(tape, staged, obs_batch);
  const ad::NodeId diff = tape.sub(preds, tape.input(std::move(targets)));
  const ad::NodeId loss =
      tape.scale(tape.sum_all(tape.mul(diff, diff)), 1.0 / B);

  const double loss_value = tape.value(loss).at(0, 0);
  if (!std::isfinite(loss_value)) {
    std::ostringstream msg;
    msg << "train_step: non-finite loss " << loss_value << "; batch indices [";
    for (std::size_t i = 0; i < indices.size(); ++i) {
      msg << (i ? "," : "") << indices[i];
    }
    msg << "], rewards [";
    for (int i = 0; i < B; ++i) {
      msg << (i ? "," : "") << buffer[indices[i]].reward;
    }
    msg << "]";
    throw std::runtime_error(msg.str());
  }

  const std::vector<ad::Tensor> grads = tape.gradients(loss, staged.all);
  adam.lr = cfg.lr;
  adam_step(params.tensors(), grads, adam);
  return TrainStepResult{true, loss_value};
}

TrainingResult run_training(const TrainConfig& cfg,
                            const ScenarioConfig& scenario,
                            const std::string& out_dir,
                            std::ostream* progress) {
  namespace fs = std::filesystem;
  cfg.validate();
  scenario.validate();
  fs::create_directories(out_dir);

  const fs::path out(out_dir);
  // Self-describing run directory: the exact configs used.
  {
    std::ofstream cfg_out(out / "config.json");
    cfg_out << "{\"train\": " << train_config_to_json_text(cfg)
            << ", \"scenario\": " << scenario_to_json_text(scenario) << "}\n";
  }
  const std::string log_path = (out / "train_log.jsonl").string();
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot open training log: " + log_path);

  RngStream init_rng = substream(cfg.seed, streams::kParamInit, 0);
  ModelParams params = init_params(scenario.ablation, init_rng);
  ModelParams target_params = params;
  long long target_version = 0;
  ad::AdamState adam;
  adam.lr = cfg.lr;
  ReplayBuffer buffer(cfg.replay_capacity);
  RngStream replay_rng = substream(cfg.seed, streams::kReplay, 0);
  const ActionSpace space = action_space(scenario.v_pref);

  const auto checkpoint_path = [&out](int episode) {
    return (out / ("ckpt_" + std::to_string(episode) + ".bin")).string();
  };

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    const double eps = epsilon_schedule(episode, cfg);
    RngStream scene_rng =
        substream(cfg.seed, streams::kTrainScenario,
                  static_cast<std::uint64_t>(episode));
    RngStream policy_rng = substream(cfg.seed, streams::kTrainPolicy,
                                     static_cast<std::uint64_t>(episode));

    Environment env(scenario, scene_rng);
    JointObservation obs = env.observe();
    double episode_return = 0.0;
    double loss_sum = 0.0;
    int loss_count = 0;

    const auto maybe_update = [&]() {
      if (buffer.size() <
          static_cast<std::size_t>(cfg.warmup_transitions)) {
        return;
      }
      const TrainStepResult r = train_step(params, target_params,
                                           target_version, buffer, adam, cfg,
                                           replay_rng);
      if (r.updated) {
        loss_sum += r.loss;
        ++loss_count;
      }
    };

    while (!env.done()) {
      const ActionChoice choice = select_action(
          env.agents(), params, space, eps, cfg.gamma, scenario, policy_rng);
      const StepResult res = env.step(choice.action);
      JointObservation next_obs = env.observe();
      buffer.push(Transition{std::move(obs), res.reward, next_obs, res.done});
      obs = std::move(next_obs);
      episode_return += res.reward;
      if (cfg.updates_per_episode == 0) maybe_update();
    }
    for (int u = 0; u < cfg.updates_per_episode; ++u) maybe_update();

    if ((episode + 1) % cfg.target_sync_every == 0) {
      target_params = params;
      ++target_version;
    }

    json line{{"episode", episode},
              {"return", episode_return},
              {"outcome", to_string(env.outcome())},
              {"epsilon", eps}};
    line["mean_loss"] =
        loss_count > 0 ? json(loss_sum / loss_count) : json(nullptr);
    log << line.dump() << "\n";

    if ((episode + 1) % 1000 == 0 && episode + 1 != cfg.episodes) {
      save_checkpoint(params, checkpoint_path(episode + 1));
    }
    if (progress != nullptr && (episode + 1) % 200 == 0) {
      *progress << "episode " << (episode + 1) << "/" << cfg.episodes
                << " epsilon " << eps << " return " << episode_return << "\n";
      progress->flush();
    }
  }

  const std::string final_path = checkpoint_path(cfg.episodes);
  save_checkpoint(params, final_path);
  log.flush();
  if (!log) throw std::runtime_error("training log write failed: " + log_path);
  return TrainingResult{std::move(params), log_path, final_path, cfg.episodes};
}

}  // namespace hetnav
