#pragma once

#include <random>

#include "origami/common.hpp"

namespace origami {

struct ActionDistribution {
  VecX mean;
  VecX std;
};

double log_prob(const ActionDistribution& dist, const VecX& action);
double entropy(const ActionDistribution& dist);
// mean + std * standard normal draws.
VecX sample_action(const ActionDistribution& dist, std::mt19937_64& rng);

// Coefficients of the composite loss
//   -surrogate + value_coef * value_loss - entropy_coef * entropy.
struct LossSpec {
  double clip = 0.2;
  double value_clip = 0.2;  // <= 0 disables value clipping
  double value_coef = 0.5;
  double entropy_coef = 0.0;
};

// Column-per-sample minibatch.
struct Minibatch {
  MatX obs;        // obs_dim x B
  MatX actions;    // act_dim x B
  VecX log_prob_old;
  VecX advantages;
  VecX returns;     // value targets
  VecX values_old;
};

struct LossReport {
  double loss = 0.0;
  double policy_loss = 0.0;  // -surrogate
  double value_loss = 0.0;   // mean of the (clipped) squared error
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double max_ratio_deviation = 0.0;
};

// Gaussian policy obs -> 64 -> 64 -> mean (ReLU) with a state-independent
// log-std vector, plus a separate value network obs -> 64 -> 64 -> 1. All
// parameters live in one flat vector so optimizers and checkpoints can treat
// them uniformly.
class ActorCritic {
 public:
  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 2.0;

  ActorCritic(int obs_dim, int act_dim, int hidden = 64);

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  int hidden() const { return hidden_; }
  int num_params() const { return static_cast<int>(theta_.size()); }

  const VecX& parameters() const { return theta_; }
  // Throws kDimensionMismatch on a wrong size; clamps the log-std entries.
  void set_parameters(const VecX& theta);
  VecX& mutable_parameters() { return theta_; }
  void clamp_log_std();

  // Orthogonal weights (gain sqrt(2) hidden, 0.01 policy output, 1 value
  // output), zero biases, zero log-std.
  void initialize(std::mt19937_64& rng);

  ActionDistribution policy(const VecX& obs) const;
  double value(const VecX& obs) const;

  // Loss over the minibatch; fills `grad` (same layout as parameters()) when
  // non-null.
  LossReport loss(const Minibatch& batch, const LossSpec& spec, VecX* grad) const;

  // Parameter block offsets, exposed for tests.
  struct Layout {
    int pw1, pb1, pw2, pb2, pw3, pb3, log_std, vw1, vb1, vw2, vb2, vw3, vb3, total;
  };
  const Layout& layout() const { return layout_; }

 private:
  struct Net {
    int w1, b1, w2, b2, w3, b3, out;
  };
  struct Cache {
    MatX z1, h1, z2, h2, out;
  };
  void forward(const Net& net, const MatX& x, Cache* cache) const;
  void backward(const Net& net, const MatX& x, const Cache& cache, const MatX& dout,
                VecX* grad) const;

  int obs_dim_, act_dim_, hidden_;
  Layout layout_;
  Net policy_net_, value_net_;
  VecX theta_;
};

}  // namespace origami
