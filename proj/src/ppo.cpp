#include "origami/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "origami/util.hpp"

namespace origami {

double linear_schedule(double start, double end, double progress) {
  const double p = std::clamp(progress, 0.0, 1.0);
  return start + (end - start) * p;
}

RunningMeanStd::RunningMeanStd(int dim)
    : mean_(VecX::Zero(dim)), var_(VecX::Ones(dim)) {}

void RunningMeanStd::update(const MatX& batch) {
  if (batch.rows() != mean_.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "normalizer batch has the wrong width");
  }
  const double m = static_cast<double>(batch.cols());
  if (m == 0) return;
  const VecX bmean = batch.rowwise().mean();
  const VecX bvar = (batch.colwise() - bmean).array().square().rowwise().mean();
  if (count_ == 0.0) {
    mean_ = bmean;
    var_ = bvar;
    count_ = m;
    return;
  }
  const double n = count_;
  const double tot = n + m;
  const VecX delta = bmean - mean_;
  const VecX m2 = var_ * n + bvar * m + delta.cwiseProduct(delta) * (n * m / tot);
  mean_ += delta * (m / tot);
  var_ = m2 / tot;
  count_ = tot;
}

void RunningMeanStd::save(BinaryWriter& w) const {
  w.vec(mean_);
  w.vec(var_);
  w.f64(count_);
}

void RunningMeanStd::load(BinaryReader& r) {
  VecX mean = r.vec();
  VecX var = r.vec();
  if (mean.size() != mean_.size() || var.size() != var_.size()) {
    throw Error(ErrorKind::kCheckpoint, "normalizer width mismatch");
  }
  mean_ = mean;
  var_ = var;
  count_ = r.f64();
}

VecX ObsNormalizer::normalize(const VecX& obs) const {
  const VecX z = (obs - rms_.mean()).cwiseQuotient((rms_.var().array() + eps_).sqrt().matrix());
  return z.cwiseMax(-clip_).cwiseMin(clip_);
}

RewardScaler::RewardScaler(int n_envs, double gamma, double clip, double eps)
    : rms_(1), returns_(VecX::Zero(n_envs)), gamma_(gamma), clip_(clip), eps_(eps) {}

VecX RewardScaler::scale(const VecX& rewards, const std::vector<bool>& dones) {
  returns_ = returns_ * gamma_ + rewards;
  rms_.update(returns_.transpose());
  const double s = std::sqrt(rms_.var()[0] + eps_);
  VecX out = (rewards / s).cwiseMax(-clip_).cwiseMin(clip_);
  for (int e = 0; e < returns_.size(); ++e) {
    if (dones[e]) returns_[e] = 0.0;
  }
  return out;
}

double RewardScaler::std() const { return std::sqrt(rms_.var()[0] + eps_); }

void RewardScaler::save(BinaryWriter& w) const {
  rms_.save(w);
  w.vec(returns_);
}

void RewardScaler::load(BinaryReader& r) {
  rms_.load(r);
  VecX ret = r.vec();
  if (ret.size() != returns_.size()) throw Error(ErrorKind::kCheckpoint, "env count mismatch");
  returns_ = ret;
}

GaeResult compute_gae(const VecX& rewards, const VecX& values,
                      const std::vector<bool>& dones, double last_value, double gamma,
                      double lambda) {
  const int n = static_cast<int>(rewards.size());
  if (values.size() != n || static_cast<int>(dones.size()) != n) {
    throw Error(ErrorKind::kDimensionMismatch, "GAE inputs differ in length");
  }
  GaeResult out{VecX::Zero(n), VecX::Zero(n)};
  double next_adv = 0.0;
  double next_value = last_value;
  for (int t = n - 1; t >= 0; --t) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[t] = next_adv;
    next_value = values[t];
  }
  out.returns = out.advantages + values;
  return out;
}

VecX normalize_advantages(const VecX& adv) {
  if (adv.size() < 2) return adv;
  const double mean = adv.mean();
  const double var = (adv.array() - mean).square().sum() / (adv.size() - 1);
  return (adv.array() - mean) / (std::sqrt(var) + 1e-8);
}

double explained_variance(const VecX& predicted, const VecX& target) {
  const double mean_t = target.mean();
  const double var_t = (target.array() - mean_t).square().mean();
  if (var_t == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const VecX r = target - predicted;
  const double var_r = (r.array() - r.mean()).square().mean();
  return 1.0 - var_r / var_t;
}

Adam::Adam(int n, double beta1, double beta2, double eps)
    : m_(VecX::Zero(n)), v_(VecX::Zero(n)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(VecX& theta, const VecX& grad, double lr) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr / c1;
  theta.array() -= step * m_.array() / ((v_.array() / c2).sqrt() + eps_);
}

void Adam::save(BinaryWriter& w) const {
  w.vec(m_);
  w.vec(v_);
  w.i64(t_);
}

void Adam::load(BinaryReader& r) {
  VecX m = r.vec();
  VecX v = r.vec();
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw Error(ErrorKind::kCheckpoint, "optimizer state size mismatch");
  }
  m_ = m;
  v_ = v;
  t_ = r.i64();
}

double clip_grad_norm(VecX& grad, double max_norm) {
  const double norm = grad.norm();
  if (max_norm > 0.0 && norm > max_norm) grad *= max_norm / (norm + 1e-6);
  return norm;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kConfig, m); };
  if (total_timesteps < 1) fail("train.total_timesteps must be >= 1");
  if (n_envs < 1) fail("train.n_envs must be >= 1");
  if (steps_per_iteration < n_envs || steps_per_iteration % n_envs != 0) {
    fail("train.steps_per_iteration must be a positive multiple of train.n_envs");
  }
  if (minibatch_size < 1 || minibatch_size > steps_per_iteration) {
    fail("train.minibatch_size must lie in [1, steps_per_iteration]");
  }
  if (epochs < 1) fail("train.epochs must be >= 1");
  if (!(clip > 0.0 && clip < 1.0)) fail("train.clip must lie in (0, 1)");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("train.gamma must lie in [0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("train.gae_lambda must lie in [0, 1]");
  if (hidden < 1) fail("train.hidden must be >= 1");
  if (workers < 1) fail("train.workers must be >= 1");
}

namespace {

std::uint64_t random_index(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

}  // namespace

PpoTrainer::PpoTrainer(const TrainConfig& config, const EnvFactory& factory,
                       std::optional<DesignDistribution> design)
    : config_(config),
      model_(1, 1, 1),
      design_(std::move(design)),
      rng_(derive_seed(config.seed, 1)) {
  config_.validate();
  slots_.resize(config_.n_envs);
  for (int e = 0; e < config_.n_envs; ++e) {
    slots_[e].env = factory(e);
    slots_[e].rng.seed(derive_seed(config_.seed, 1000 + e));
  }
  const int obs_dim = slots_[0].env->observation_size();
  const int act_dim = slots_[0].env->action_size();
  if (design_ && slots_[0].env->design_size() != design_->dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "design distribution has " + std::to_string(design_->dim()) +
                    " entries, environment expects " +
                    std::to_string(slots_[0].env->design_size()));
  }
  model_ = ActorCritic(obs_dim, act_dim, config_.hidden);
  std::mt19937_64 init_rng(derive_seed(config_.seed, 0));
  model_.initialize(init_rng);
  adam_ = Adam(model_.num_params());
  obs_norm_ = ObsNormalizer(obs_dim, config_.obs_clip);
  reward_scaler_ = RewardScaler(config_.n_envs, config_.gamma, config_.reward_clip);

  MatX first(obs_dim, config_.n_envs);
  for (int e = 0; e < config_.n_envs; ++e) {
    begin_episode(slots_[e]);
    first.col(e) = slots_[e].obs;
  }
  if (config_.normalize_obs) obs_norm_.update(first);
}

void PpoTrainer::begin_episode(Slot& s) {
  if (design_ && s.env->design_size() > 0) {
    s.design = design_->sample(s.rng);
    s.design_version = design_version_;
    s.env->set_design(s.design.value);
  }
  s.obs = s.env->reset(s.rng);
  s.episode_return = 0.0;
  s.episode_length = 0;
}

VecX PpoTrainer::normalize(const VecX& raw_obs) const {
  return config_.normalize_obs ? obs_norm_.normalize(raw_obs) : raw_obs;
}

IterationStats PpoTrainer::iterate() {
  const int n_envs = config_.n_envs;
  const int horizon = config_.rollout_length();
  const int obs_dim = model_.obs_dim();
  const int act_dim = model_.act_dim();
  const int total = horizon * n_envs;
  const double progress =
      static_cast<double>(timesteps_) / static_cast<double>(config_.total_timesteps);
  const double lr = linear_schedule(config_.lr_start, config_.lr_end, progress);
  const double ent_coef = linear_schedule(config_.entropy_start, config_.entropy_end, progress);

  // Buffer, indexed [env * horizon + t].
  MatX obs_buf(obs_dim, total), act_buf(act_dim, total);
  VecX logp_buf(total), value_buf(total), reward_buf(total);
  std::vector<bool> done_buf(total, false);

  IterationStats st;
  std::vector<DesignSample> design_batch;
  std::vector<double> design_returns;
  double dist_sum = 0.0;

  std::vector<VecX> actions(n_envs);
  std::vector<Transition> trans(n_envs);
  for (int t = 0; t < horizon; ++t) {
    for (int e = 0; e < n_envs; ++e) {
      Slot& s = slots_[e];
      const VecX x = normalize(s.obs);
      const ActionDistribution dist = model_.policy(x);
      actions[e] = sample_action(dist, s.rng);
      const int k = e * horizon + t;
      obs_buf.col(k) = x;
      act_buf.col(k) = actions[e];
      logp_buf[k] = log_prob(dist, actions[e]);
      value_buf[k] = model_.value(x);
    }
    parallel_for(n_envs, config_.workers,
                 [&](std::int64_t e) { trans[e] = slots_[e].env->step(actions[e]); });

    VecX raw_rewards(n_envs);
    std::vector<bool> dones(n_envs);
    for (int e = 0; e < n_envs; ++e) {
      raw_rewards[e] = trans[e].reward;
      dones[e] = trans[e].terminated || trans[e].truncated;
    }
    const VecX scaled = config_.normalize_reward
                            ? reward_scaler_.scale(raw_rewards, dones)
                            : raw_rewards;

    std::vector<VecX> terminal_obs(n_envs);
    MatX new_obs(obs_dim, n_envs);
    for (int e = 0; e < n_envs; ++e) {
      Slot& s = slots_[e];
      const int k = e * horizon + t;
      reward_buf[k] = scaled[e];
      done_buf[k] = dones[e];
      s.episode_return += trans[e].reward;
      ++s.episode_length;
      if (dones[e]) {
        ++st.episodes;
        st.mean_return += s.episode_return;
        st.mean_length += s.episode_length;
        st.best_return = st.episodes == 1 ? s.episode_return
                                          : std::max(st.best_return, s.episode_return);
        if (trans[e].success) st.success_rate += 1.0;
        if (trans[e].collision) st.collision_rate += 1.0;
        if (trans[e].failure) st.failure_rate += 1.0;
        dist_sum += trans[e].distance;
        if (design_ && s.design_version == design_version_) {
          design_batch.push_back(s.design);
          design_returns.push_back(s.episode_return);
        }
        if (trans[e].truncated && !trans[e].terminated) terminal_obs[e] = trans[e].observation;
        begin_episode(s);
      } else {
        s.obs = trans[e].observation;
      }
      new_obs.col(e) = s.obs;
    }
    if (config_.normalize_obs) obs_norm_.update(new_obs);
    // Time-limit cut-offs bootstrap from the value of the last observation.
    for (int e = 0; e < n_envs; ++e) {
      if (terminal_obs[e].size() > 0) {
        reward_buf[e * horizon + t] += config_.gamma * model_.value(normalize(terminal_obs[e]));
      }
    }
    timesteps_ += n_envs;
  }

  VecX advantages(total), returns(total);
  for (int e = 0; e < n_envs; ++e) {
    const double last = model_.value(normalize(slots_[e].obs));
    std::vector<bool> d(done_buf.begin() + e * horizon, done_buf.begin() + (e + 1) * horizon);
    const GaeResult g = compute_gae(reward_buf.segment(e * horizon, horizon),
                                    value_buf.segment(e * horizon, horizon), d, last,
                                    config_.gamma, config_.gae_lambda);
    advantages.segment(e * horizon, horizon) = g.advantages;
    returns.segment(e * horizon, horizon) = g.returns;
  }
  const VecX adv_norm = normalize_advantages(advantages);

  LossSpec spec;
  spec.clip = config_.clip;
  spec.value_clip = config_.value_clip;
  spec.value_coef = config_.value_coef;
  spec.entropy_coef = ent_coef;

  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  const int mb = config_.minibatch_size;
  int updates = 0;
  bool first = true;
  VecX grad;
  Minibatch batch;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    for (int i = total - 1; i > 0; --i) {
      std::swap(order[i], order[random_index(rng_, static_cast<std::uint64_t>(i) + 1)]);
    }
    for (int start = 0; start + mb <= total; start += mb) {
      batch.obs.resize(obs_dim, mb);
      batch.actions.resize(act_dim, mb);
      batch.log_prob_old.resize(mb);
      batch.advantages.resize(mb);
      batch.returns.resize(mb);
      batch.values_old.resize(mb);
      for (int j = 0; j < mb; ++j) {
        const int k = order[start + j];
        batch.obs.col(j) = obs_buf.col(k);
        batch.actions.col(j) = act_buf.col(k);
        batch.log_prob_old[j] = logp_buf[k];
        batch.advantages[j] = adv_norm[k];
        batch.returns[j] = returns[k];
        batch.values_old[j] = value_buf[k];
      }
      const LossReport rep = model_.loss(batch, spec, &grad);
      if (!std::isfinite(rep.loss) || !grad.allFinite()) {
        throw Error(ErrorKind::kNonFiniteLoss,
                    "non-finite loss at iteration " + std::to_string(iteration_) +
                        ", epoch " + std::to_string(epoch));
      }
      if (first) {
        st.first_ratio_deviation = rep.max_ratio_deviation;
        first = false;
      }
      clip_grad_norm(grad, config_.max_grad_norm);
      adam_.step(model_.mutable_parameters(), grad, lr);
      model_.clamp_log_std();
      st.clip_fraction += rep.clip_fraction;
      st.approx_kl += rep.approx_kl;
      st.entropy += rep.entropy;
      st.policy_loss += rep.policy_loss;
      st.value_loss += rep.value_loss;
      ++updates;
    }
  }
  if (updates > 0) {
    st.clip_fraction /= updates;
    st.approx_kl /= updates;
    st.entropy /= updates;
    st.policy_loss /= updates;
    st.value_loss /= updates;
  }
  st.explained_variance = explained_variance(value_buf, returns);

  if (design_ && !design_batch.empty()) {
    design_->update(design_batch, design_returns);
    ++design_version_;
  }
  st.design_batch = static_cast<int>(design_batch.size());

  if (st.episodes > 0) {
    st.mean_return /= st.episodes;
    st.mean_length /= st.episodes;
    st.success_rate /= st.episodes;
    st.collision_rate /= st.episodes;
    st.failure_rate /= st.episodes;
    st.mean_final_distance = dist_sum / st.episodes;
  }
  st.entropy_coef = ent_coef;
  st.learning_rate = lr;
  ++iteration_;
  st.iteration = iteration_;
  st.timesteps = timesteps_;
  return st;
}

void PpoTrainer::save(BinaryWriter& w) const {
  w.i64(iteration_);
  w.i64(timesteps_);
  w.vec(model_.parameters());
  adam_.save(w);
  obs_norm_.save(w);
  reward_scaler_.save(w);
  w.boolean(design_.has_value());
  if (design_) {
    w.vec(design_->mu());
    w.vec(design_->sigma());
  }
  w.i64(design_version_);
  w.rng(rng_);
  w.u64(slots_.size());
  for (const Slot& s : slots_) {
    w.rng(s.rng);
    w.vec(s.obs);
    w.f64(s.episode_return);
    w.i64(s.episode_length);
    w.vec(s.design.raw);
    w.vec(s.design.value);
    w.i64(s.design_version);
    s.env->save_state(w);
  }
}

void PpoTrainer::load(BinaryReader& r) {
  iteration_ = static_cast<int>(r.i64());
  timesteps_ = r.i64();
  const VecX theta = r.vec();
  if (theta.size() != model_.num_params()) {
    throw Error(ErrorKind::kCheckpoint, "policy parameter count mismatch");
  }
  model_.set_parameters(theta);
  adam_.load(r);
  obs_norm_.load(r);
  reward_scaler_.load(r);
  const bool has_design = r.boolean();
  if (has_design != design_.has_value()) {
    throw Error(ErrorKind::kCheckpoint, "checkpoint and run disagree on design optimization");
  }
  if (design_) {
    const VecX mu = r.vec();
    const VecX sigma = r.vec();
    if (mu.size() != design_->dim()) throw Error(ErrorKind::kCheckpoint, "design size mismatch");
    design_->set(mu, sigma);
  }
  design_version_ = r.i64();
  r.rng(&rng_);
  if (r.u64() != slots_.size()) throw Error(ErrorKind::kCheckpoint, "environment count mismatch");
  for (Slot& s : slots_) {
    r.rng(&s.rng);
    s.obs = r.vec();
    s.episode_return = r.f64();
    s.episode_length = static_cast<int>(r.i64());
    s.design.raw = r.vec();
    s.design.value = r.vec();
    s.design_version = r.i64();
    s.env->load_state(r);
  }
}

EpisodeSummary run_episode(
    Environment& env, const ActorCritic& model, const ObsNormalizer* normalizer,
    std::mt19937_64& rng, bool deterministic,
    const std::function<void(int, const VecX&, const Transition&)>& on_step) {
  EpisodeSummary out;
  VecX obs = env.reset(rng);
  for (;;) {
    const VecX x = normalizer ? normalizer->normalize(obs) : obs;
    const ActionDistribution dist = model.policy(x);
    const VecX action = deterministic ? dist.mean : sample_action(dist, rng);
    const Transition t = env.step(action);
    out.total_return += t.reward;
    ++out.length;
    if (on_step) on_step(out.length, action, t);
    out.final_distance = t.distance;
    out.success = out.success || t.success;
    out.collision = out.collision || t.collision;
    out.failure = out.failure || t.failure;
    if (t.terminated || t.truncated) break;
    obs = t.observation;
  }
  return out;
}

}  // namespace origami
