#include <doctest.h>

#include <random>

#include "origami/ppo.hpp"

using namespace origami;

TEST_CASE("GAE against a direct backward recursion") {
  VecX r(3), v(3);
  r << 1, 0, 1;
  v << 0.5, 0.5, 0.5;
  const double gamma = 0.9, lambda = 0.95, last = 0.5;
  const GaeResult g = compute_gae(r, v, {false, false, false}, last, gamma, lambda);
  const double d2 = 1 + gamma * last - 0.5;
  const double d1 = 0 + gamma * 0.5 - 0.5;
  const double d0 = 1 + gamma * 0.5 - 0.5;
  const double a2 = d2, a1 = d1 + gamma * lambda * a2, a0 = d0 + gamma * lambda * a1;
  CHECK(g.advantages[2] == doctest::Approx(a2));
  CHECK(g.advantages[1] == doctest::Approx(a1));
  CHECK(g.advantages[0] == doctest::Approx(a0));
  CHECK(g.returns[0] == doctest::Approx(a0 + 0.5));
}

TEST_CASE("GAE does not bootstrap across episode ends") {
  VecX r(3), v(3);
  r << 1, 2, 3;
  v << 0.1, 0.2, 0.3;
  const GaeResult g = compute_gae(r, v, {false, true, false}, 10.0, 0.99, 0.95);
  CHECK(g.advantages[1] == doctest::Approx(2 - 0.2));
  CHECK(g.advantages[2] == doctest::Approx(3 + 0.99 * 10.0 - 0.3));
  // lambda = 1 and gamma = 1 give the plain return minus the value
  const GaeResult mc = compute_gae(r, v, {false, false, true}, 0.0, 1.0, 1.0);
  CHECK(mc.advantages[0] == doctest::Approx(6 - 0.1));
}

TEST_CASE("linear schedule") {
  CHECK(linear_schedule(0.02, 0.001, 0.5) == doctest::Approx(0.0105));
  CHECK(linear_schedule(0.02, 0.001, 0.0) == 0.02);
  CHECK(linear_schedule(0.02, 0.001, 1.0) == doctest::Approx(0.001));
  CHECK(linear_schedule(0.02, 0.001, 2.0) == doctest::Approx(0.001));
}

TEST_CASE("running statistics do not depend on batch splits") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(5.0, 2.0);
  MatX all(2, 300);
  for (int k = 0; k < all.cols(); ++k) all.col(k) << g(rng), g(rng) * 0.1;
  RunningMeanStd one(2), split(2);
  one.update(all);
  split.update(all.leftCols(17));
  split.update(all.middleCols(17, 200));
  split.update(all.rightCols(83));
  CHECK((one.mean() - split.mean()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((one.var() - split.var()).cwiseAbs().maxCoeff() < 1e-10);
  const VecX mean = all.rowwise().mean();
  CHECK((one.mean() - mean).cwiseAbs().maxCoeff() < 1e-10);
  const double var0 = (all.row(0).array() - mean[0]).square().mean();
  CHECK(one.var()[0] == doctest::Approx(var0));
}

TEST_CASE("observation normalizer clips") {
  ObsNormalizer n(1, 5.0);
  MatX b(1, 4);
  b << 0, 0, 2, 2;
  n.update(b);
  CHECK(n.normalize(VecX::Constant(1, 1.0))[0] == doctest::Approx(0.0));
  CHECK(n.normalize(VecX::Constant(1, 100.0))[0] == 5.0);
}

TEST_CASE("advantage normalization and explained variance") {
  VecX a(4);
  a << 1, 2, 3, 4;
  const VecX n = normalize_advantages(a);
  CHECK(n.mean() == doctest::Approx(0.0).scale(1.0));
  CHECK(std::sqrt(n.squaredNorm() / 3) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(explained_variance(a, a) == doctest::Approx(1.0));
  CHECK(explained_variance(VecX::Constant(4, 2.5), a) == doctest::Approx(0.0));
}

TEST_CASE("gradient clipping") {
  VecX g(2);
  g << 3, 4;
  CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g.norm() == doctest::Approx(1.0));
  CHECK(g[0] == doctest::Approx(0.6));
  VecX small(2);
  small << 0.1, 0.1;
  clip_grad_norm(small, 1.0);
  CHECK(small[0] == 0.1);
}

TEST_CASE("Adam first step moves by the learning rate") {
  Adam adam(2);
  VecX theta = VecX::Zero(2), grad(2);
  grad << 2.0, -0.5;
  adam.step(theta, grad, 0.01);
  CHECK(theta[0] == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(theta[1] == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("Adam minimizes a quadratic") {
  Adam adam(3);
  VecX theta(3);
  theta << 1, -2, 3;
  for (int k = 0; k < 3000; ++k) adam.step(theta, 2.0 * theta, 0.01);
  CHECK(theta.norm() < 1e-2);
}

TEST_CASE("training config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.steps_per_iteration = 4095;
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.minibatch_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}
