#include <doctest.h>

#include <random>

#include "origami/design.hpp"

using namespace origami;

TEST_CASE("score at the mean and one sigma away") {
  DesignConfig c;
  DesignDistribution d(4, c);
  VecX mu(4), sigma(4);
  mu << 1.0, 1.2, 0.8, 2.0;
  sigma << 0.3, 0.1, 0.5, 0.2;
  d.set(mu, sigma);
  const DesignGradient at_mean = d.grad_log_prob(mu);
  CHECK(at_mean.mu.isZero());
  for (int i = 0; i < 4; ++i) CHECK(at_mean.sigma[i] == doctest::Approx(-1.0 / sigma[i]));
  const DesignGradient one_off = d.grad_log_prob(mu + sigma);
  for (int i = 0; i < 4; ++i) {
    CHECK(one_off.sigma[i] == doctest::Approx(0.0).scale(1.0));
    CHECK(one_off.mu[i] == doctest::Approx(1.0 / sigma[i]));
  }
}

TEST_CASE("score matches the log-density derivative") {
  DesignDistribution d(3, DesignConfig{});
  VecX mu(3), sigma(3), x(3);
  mu << 1.1, 0.9, 1.6;
  sigma << 0.2, 0.4, 0.3;
  x << 1.3, 0.5, 1.75;
  d.set(mu, sigma);
  const DesignGradient g = d.grad_log_prob(x);
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    VecX mp = mu, mm = mu, sp = sigma, sm = sigma;
    mp[i] += h;
    mm[i] -= h;
    sp[i] += h;
    sm[i] -= h;
    DesignDistribution a = d, b = d;
    a.set(mp, sigma);
    b.set(mm, sigma);
    CHECK(g.mu[i] == doctest::Approx((a.log_density(x) - b.log_density(x)) / (2 * h)).epsilon(1e-6));
    a.set(mu, sp);
    b.set(mu, sm);
    CHECK(g.sigma[i] == doctest::Approx((a.log_density(x) - b.log_density(x)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("equal returns leave the distribution unchanged") {
  DesignDistribution d(5, DesignConfig{});
  std::mt19937_64 rng(7);
  std::vector<DesignSample> batch;
  for (int k = 0; k < 8; ++k) batch.push_back(d.sample(rng));
  const VecX mu = d.mu(), sigma = d.sigma();
  const DesignGradient step = d.update(batch, std::vector<double>(8, 3.5));
  CHECK(step.mu.isZero());
  CHECK(step.sigma.isZero());
  CHECK(d.mu() == mu);
  CHECK(d.sigma() == sigma);
}

TEST_CASE("a single sample cancels against its own baseline") {
  DesignDistribution d(2, DesignConfig{});
  std::mt19937_64 rng(8);
  const VecX mu = d.mu();
  d.update({d.sample(rng)}, {42.0});
  CHECK(d.mu() == mu);
}

TEST_CASE("update step against a hand computation") {
  DesignConfig c;
  c.lr_mu = 0.1;
  c.lr_sigma = 0.05;
  DesignDistribution d(1, c);
  VecX mu(1), sigma(1);
  mu << 1.0;
  sigma << 0.5;
  d.set(mu, sigma);
  DesignSample a, b;
  a.raw = a.value = VecX::Constant(1, 1.5);
  b.raw = b.value = VecX::Constant(1, 0.75);
  // baseline 2, advantages +1 and -1
  const DesignGradient step = d.update({a, b}, {3.0, 1.0});
  const double gmu = 0.5 * ((0.5 / 0.25) - (-0.25 / 0.25));
  const double gs = 0.5 * (((0.25 - 0.25) / 0.125) - ((0.0625 - 0.25) / 0.125));
  CHECK(step.mu[0] == doctest::Approx(0.1 * gmu));
  CHECK(step.sigma[0] == doctest::Approx(0.05 * gs));
  CHECK(d.mu()[0] == doctest::Approx(1.0 + 0.1 * gmu));
}

TEST_CASE("sigma floor and bounds") {
  DesignConfig c;
  DesignDistribution d(3, c);
  d.set(VecX::Constant(3, 5.0), VecX::Constant(3, -1.0));
  CHECK(d.mu().maxCoeff() <= c.s_max);
  CHECK(d.sigma().minCoeff() >= c.sigma_floor);
  std::mt19937_64 rng(9);
  d.set(VecX::Constant(3, c.s_max), VecX::Constant(3, 1.0));
  for (int k = 0; k < 100; ++k) {
    const DesignSample s = d.sample(rng);
    CHECK(s.value.minCoeff() >= c.s_min);
    CHECK(s.value.maxCoeff() <= c.s_max);
  }
  CHECK(d.mode().maxCoeff() <= c.s_max);
  CHECK_THROWS_AS(DesignDistribution(0, c), Error);
  CHECK_THROWS_AS(d.grad_log_prob(VecX::Zero(2)), Error);
}

TEST_CASE("sample mean and spread") {
  DesignDistribution d(1, DesignConfig{});
  d.set(VecX::Constant(1, 1.0), VecX::Constant(1, 0.3));
  std::mt19937_64 rng(10);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = d.sample(rng).raw[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 1.0) < 3 * 0.3 / std::sqrt(n));
  CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(0.3).epsilon(0.03));
}
