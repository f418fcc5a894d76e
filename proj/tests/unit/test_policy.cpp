#include <doctest.h>

#include <cmath>
#include <random>

#include "origami/policy.hpp"

using namespace origami;

TEST_CASE("Gaussian log-probability and entropy") {
  ActionDistribution d{VecX::Zero(3), VecX::Ones(3)};
  CHECK(entropy(d) == doctest::Approx(4.2568).epsilon(1e-4));
  CHECK(entropy(d) == doctest::Approx(1.5 * (1.0 + std::log(2 * M_PI))));
  CHECK(log_prob(d, VecX::Zero(3)) == doctest::Approx(-1.5 * std::log(2 * M_PI)));
  ActionDistribution e{VecX::Constant(2, 1.0), VecX::Constant(2, 0.5)};
  VecX a(2);
  a << 1.5, 0.0;
  const double expect = -0.5 * (1.0 + 4.0) - 2 * std::log(0.5) - std::log(2 * M_PI);
  CHECK(log_prob(e, a) == doctest::Approx(expect));
}

TEST_CASE("sampling is reproducible") {
  ActionDistribution d{VecX::Zero(3), VecX::Ones(3)};
  std::mt19937_64 a(5), b(5);
  CHECK(sample_action(d, a) == sample_action(d, b));
}

TEST_CASE("network shapes and log-std clamp") {
  ActorCritic m(36, 3, 64);
  std::mt19937_64 rng(1);
  m.initialize(rng);
  const ActionDistribution d = m.policy(VecX::Zero(36));
  CHECK(d.mean.size() == 3);
  CHECK(d.std.isApprox(VecX::Ones(3)));
  VecX theta = m.parameters();
  theta.setConstant(10.0);
  m.set_parameters(theta);
  m.clamp_log_std();
  const ActionDistribution c = m.policy(VecX::Zero(36));
  CHECK(c.std[0] == doctest::Approx(std::exp(2.0)));
}

TEST_CASE("ratio is one before any update") {
  ActorCritic m(4, 2, 8);
  std::mt19937_64 rng(2);
  m.initialize(rng);
  std::normal_distribution<double> g(0.0, 1.0);
  Minibatch b;
  const int n = 6;
  b.obs = MatX(4, n);
  b.actions = MatX(2, n);
  b.log_prob_old = VecX(n);
  b.advantages = VecX(n);
  b.returns = VecX::Zero(n);
  b.values_old = VecX::Zero(n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < 4; ++i) b.obs(i, k) = g(rng);
    const ActionDistribution d = m.policy(b.obs.col(k));
    b.actions.col(k) = sample_action(d, rng);
    b.log_prob_old[k] = log_prob(d, b.actions.col(k));
    b.advantages[k] = g(rng);
  }
  const LossReport r = m.loss(b, LossSpec{}, nullptr);
  CHECK(r.max_ratio_deviation <= 1e-12);
  CHECK(r.policy_loss == doctest::Approx(-b.advantages.mean()));
  CHECK(r.clip_fraction == 0.0);
}

TEST_CASE("value-loss gradient on the output bias") {
  ActorCritic m(3, 1, 4);
  std::mt19937_64 rng(3);
  m.initialize(rng);
  VecX x(3);
  x << 0.3, -0.2, 0.9;
  const double v = m.value(x);
  const double target = v + 0.7;
  Minibatch b;
  b.obs = x;
  b.actions = MatX::Zero(1, 1);
  b.log_prob_old = VecX::Constant(1, log_prob(m.policy(x), VecX::Zero(1)));
  b.advantages = VecX::Zero(1);
  b.returns = VecX::Constant(1, target);
  b.values_old = VecX::Constant(1, v);
  LossSpec spec;
  spec.value_coef = 1.0;
  spec.value_clip = 0.0;
  VecX grad;
  m.loss(b, spec, &grad);
  // The value output bias is the last parameter.
  CHECK(grad[grad.size() - 1] == doctest::Approx(2.0 * (v - target)));
}

TEST_CASE("backprop matches finite differences") {
  ActorCritic m(5, 2, 8);
  std::mt19937_64 rng(4);
  m.initialize(rng);
  std::normal_distribution<double> g(0.0, 1.0);
  VecX theta = m.parameters();
  for (int i = 0; i < theta.size(); ++i) theta[i] += 0.1 * g(rng);
  m.set_parameters(theta);
  Minibatch b;
  const int n = 5;
  b.obs = MatX(5, n);
  b.actions = MatX(2, n);
  b.log_prob_old = VecX(n);
  b.advantages = VecX(n);
  b.returns = VecX(n);
  b.values_old = VecX(n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < 5; ++i) b.obs(i, k) = g(rng);
    const ActionDistribution d = m.policy(b.obs.col(k));
    b.actions.col(k) = sample_action(d, rng);
    b.log_prob_old[k] = log_prob(d, b.actions.col(k)) + 0.2 * g(rng);
    b.advantages[k] = g(rng);
    b.returns[k] = g(rng);
    b.values_old[k] = m.value(b.obs.col(k)) + 0.1 * g(rng);
  }
  LossSpec spec;
  spec.entropy_coef = 0.01;
  VecX grad;
  m.loss(b, spec, &grad);
  const double h = 1e-6;
  for (int i = 0; i < theta.size(); ++i) {
    VecX tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    ActorCritic a = m, c = m;
    a.set_parameters(tp);
    c.set_parameters(tm);
    const double fd = (a.loss(b, spec, nullptr).loss - c.loss(b, spec, nullptr).loss) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-4).scale(1e-6));
  }
}
