#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "origami/design.hpp"
#include "origami/environment.hpp"
#include "origami/policy.hpp"
#include "origami/serialize.hpp"

namespace origami {

// Linear interpolation from start (progress 0) to end (progress 1).
double linear_schedule(double start, double end, double progress);

// Running mean / population variance, merged batch-wise with the parallel
// (Chan et al.) update so the result does not depend on how data is split.
class RunningMeanStd {
 public:
  explicit RunningMeanStd(int dim = 1);
  void update(const MatX& batch);  // dim x B
  const VecX& mean() const { return mean_; }
  const VecX& var() const { return var_; }
  double count() const { return count_; }
  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

 private:
  VecX mean_, var_;
  double count_ = 0.0;
};

class ObsNormalizer {
 public:
  explicit ObsNormalizer(int dim = 1, double clip = 10.0, double eps = 1e-8)
      : rms_(dim), clip_(clip), eps_(eps) {}
  void update(const MatX& batch) { rms_.update(batch); }
  VecX normalize(const VecX& obs) const;
  const RunningMeanStd& stats() const { return rms_; }
  void save(BinaryWriter& w) const { rms_.save(w); }
  void load(BinaryReader& r) { rms_.load(r); }

 private:
  RunningMeanStd rms_;
  double clip_, eps_;
};

// Divides rewards by the running std of the discounted return; no centering.
class RewardScaler {
 public:
  RewardScaler(int n_envs = 1, double gamma = 0.99, double clip = 10.0, double eps = 1e-8);
  // rewards/dones are per environment, in environment order.
  VecX scale(const VecX& rewards, const std::vector<bool>& dones);
  double std() const;
  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

 private:
  RunningMeanStd rms_;
  VecX returns_;
  double gamma_, clip_, eps_;
};

struct GaeResult {
  VecX advantages;
  VecX returns;
};

// dones[t]: the episode ended after step t, so V_{t+1} is not bootstrapped.
// last_value bootstraps the step after the final one.
GaeResult compute_gae(const VecX& rewards, const VecX& values,
                      const std::vector<bool>& dones, double last_value, double gamma,
                      double lambda);
VecX normalize_advantages(const VecX& adv);
double explained_variance(const VecX& predicted, const VecX& target);

class Adam {
 public:
  explicit Adam(int n = 0, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5);
  void step(VecX& theta, const VecX& grad, double lr);
  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

 private:
  VecX m_, v_;
  std::int64_t t_ = 0;
  double beta1_, beta2_, eps_;
};

// Scales grad in place so its norm is at most max_norm; returns the old norm.
double clip_grad_norm(VecX& grad, double max_norm);

struct TrainConfig {
  std::int64_t total_timesteps = 500000;
  int steps_per_iteration = 4096;
  int n_envs = 8;
  int minibatch_size = 256;
  int epochs = 10;
  double clip = 0.2;
  double value_clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double entropy_start = 0.02;
  double entropy_end = 0.001;
  double lr_start = 2.5e-4;
  double lr_end = 0.0;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_obs = true;
  bool normalize_reward = true;
  double obs_clip = 10.0;
  double reward_clip = 10.0;
  int hidden = 64;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
  int rollout_length() const { return steps_per_iteration / n_envs; }
};

struct IterationStats {
  int iteration = 0;
  std::int64_t timesteps = 0;
  int episodes = 0;
  double mean_return = 0.0;
  double mean_length = 0.0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double failure_rate = 0.0;
  double mean_final_distance = 0.0;
  double best_return = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double entropy = 0.0;
  double entropy_coef = 0.0;
  double learning_rate = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double explained_variance = 0.0;
  double first_ratio_deviation = 0.0;  // max |ratio - 1| before any update
  int design_batch = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>(int index)>;

// On-policy PPO over n_envs environment copies. Each copy owns a random stream
// derived from (seed, index); rollouts, updates and logs are identical for any
// worker count.
class PpoTrainer {
 public:
  PpoTrainer(const TrainConfig& config, const EnvFactory& factory,
             std::optional<DesignDistribution> design = std::nullopt);

  IterationStats iterate();
  bool finished() const { return timesteps_ >= config_.total_timesteps; }

  const TrainConfig& config() const { return config_; }
  int iteration() const { return iteration_; }
  std::int64_t timesteps() const { return timesteps_; }
  const ActorCritic& model() const { return model_; }
  ActorCritic& model() { return model_; }
  const ObsNormalizer& obs_normalizer() const { return obs_norm_; }
  const std::optional<DesignDistribution>& design() const { return design_; }
  VecX normalize(const VecX& raw_obs) const;

  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

 private:
  struct Slot {
    std::unique_ptr<Environment> env;
    std::mt19937_64 rng;
    VecX obs;  // raw
    double episode_return = 0.0;
    int episode_length = 0;
    DesignSample design;
    std::int64_t design_version = -1;
  };

  void begin_episode(Slot& s);

  TrainConfig config_;
  ActorCritic model_;
  Adam adam_;
  ObsNormalizer obs_norm_;
  RewardScaler reward_scaler_;
  std::optional<DesignDistribution> design_;
  std::int64_t design_version_ = 0;
  std::mt19937_64 rng_;
  std::vector<Slot> slots_;
  int iteration_ = 0;
  std::int64_t timesteps_ = 0;
};

struct EpisodeSummary {
  double total_return = 0.0;
  int length = 0;
  bool success = false;
  bool collision = false;
  bool failure = false;
  double final_distance = 0.0;
};

// Runs one episode with the mean action (deterministic) or sampled actions.
EpisodeSummary run_episode(
    Environment& env, const ActorCritic& model, const ObsNormalizer* normalizer,
    std::mt19937_64& rng, bool deterministic,
    const std::function<void(int, const VecX&, const Transition&)>& on_step = {});

}  // namespace origami
