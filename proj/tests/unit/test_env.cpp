#include <doctest.h>

#include <random>

#include "origami/env.hpp"

using namespace origami;

namespace {

// Dense sampling oracle: 1000 points per segment, a crossing of the plane
// between consecutive points is located by interpolation.
bool sampled_hit(const Segment& s, const ObstacleRect& r) {
  const int n = 1000;
  Vec3 prev = s.a;
  for (int k = 1; k <= n; ++k) {
    const Vec3 cur = s.a + (s.b - s.a) * (static_cast<double>(k) / n);
    const double f0 = prev[0] - r.plane_x, f1 = cur[0] - r.plane_x;
    if (f0 == 0.0 || f0 * f1 < 0.0) {
      const double t = f0 == 0.0 ? 0.0 : f0 / (f0 - f1);
      const Vec3 c = prev + t * (cur - prev);
      if (c[1] >= r.y_min && c[1] <= r.y_max && c[2] >= r.z_min && c[2] <= r.z_max) return true;
    }
    prev = cur;
  }
  return false;
}

}  // namespace

TEST_CASE("reward function") {
  const TaskSpec task = one_obstacle_task();
  CHECK(reward_fn(9.8, false, task) == doctest::Approx(0.1));
  CHECK(reward_fn(0.0, false, task) == doctest::Approx(50.0 + 1.0 / 0.2));
  CHECK(reward_fn(50.0, true, task) == doctest::Approx(-9.98008).epsilon(1e-6));
  const RewardTerms t = reward_terms(2.0, false, task);
  CHECK(t.success == 50.0);
  CHECK(t.collision == 0.0);
  CHECK(t.total() == t.success + t.distance + t.collision);
}

TEST_CASE("segment against obstacle rectangle") {
  ObstacleRect r;
  r.plane_x = -25;
  r.y_min = -100;
  r.y_max = 100;
  r.z_min = 100;
  r.z_max = 250;
  CHECK(segment_hits({Vec3(-20, 0, 150), Vec3(-30, 0, 150)}, r));
  CHECK_FALSE(segment_hits({Vec3(-20, 0, 99.9), Vec3(-30, 0, 99.9)}, r));
  CHECK_FALSE(segment_hits({Vec3(-20, 0, 150), Vec3(-24, 0, 150)}, r));
  CHECK_FALSE(segment_hits({Vec3(-20, 120, 150), Vec3(-30, 120, 150)}, r));
  // Lying in the plane and passing through the rectangle.
  CHECK(segment_hits({Vec3(-25, -200, 150), Vec3(-25, 200, 150)}, r));
}

TEST_CASE("rest pose clears obstacle 1") {
  ManipulatorParams p;
  const ShapeSolution rest = solve_forward(TendonCommand::Zero(), VecX::Constant(15, 1.0), p);
  CHECK_FALSE(collision_check(rest.world_poses, p, one_obstacle_task().obstacles));
}

TEST_CASE("collision check agrees with dense sampling") {
  ManipulatorParams p;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, p.max_displacement());
  std::uniform_real_distribution<double> plane(-40.0, -10.0), zlo(0.0, 100.0);
  int hits = 0;
  for (int k = 0; k < 40; ++k) {
    const ShapeSolution s = solve_forward(TendonCommand(u(rng), u(rng), u(rng)), VecX::Constant(15, 1.3), p);
    ObstacleRect r;
    r.plane_x = plane(rng);
    r.z_min = zlo(rng);
    r.z_max = r.z_min + 40.0;
    r.y_min = -30;
    r.y_max = 30;
    bool oracle = false;
    for (const Segment& seg : structural_segments(s.world_poses, p)) oracle = oracle || sampled_hit(seg, r);
    CHECK(collision_check(s.world_poses, p, {r}) == oracle);
    hits += oracle;
  }
  CHECK(hits > 0);
  CHECK(hits < 40);
}

TEST_CASE("environment step semantics") {
  ManipulatorParams p;
  ReachingEnv env(p, one_obstacle_task());
  const VecX design = VecX::Constant(15, 1.45);
  const VecX obs = env.reset(design);
  CHECK(obs.size() == 6 * p.n_modules + 6);
  const double d_rest = (Vec3(0, 0, 125) - Vec3(-50, 0, 50)).norm();

  const StepResult idle = env.step(Vec3::Zero());
  CHECK(idle.info.distance == doctest::Approx(d_rest));
  CHECK(idle.reward == doctest::Approx(1.0 / (0.2 + d_rest)));
  CHECK_FALSE(idle.terminated);

  // Oversized actions are clipped to the bound; the command never goes negative.
  const StepResult big = env.step(Vec3(10.0, -10.0, 0.0));
  CHECK(big.info.action[0] == doctest::Approx(3.0));
  CHECK(big.info.action[1] == doctest::Approx(-3.0));
  CHECK(big.info.command[1] == 0.0);
  CHECK(big.info.command[0] == doctest::Approx(3.0));
}

TEST_CASE("pulling toward the obstacle ends the episode with a collision") {
  ManipulatorParams p;
  ReachingEnv env(p, one_obstacle_task());
  env.reset(VecX::Constant(15, 1.45));
  StepResult s;
  for (int t = 0; t < 60; ++t) {
    s = env.step(Vec3(3.0, 1.5, 0.0));
    if (s.terminated || s.truncated) break;
  }
  CHECK(s.terminated);
  CHECK(s.info.collision);
  CHECK_FALSE(s.info.success);
  CHECK(s.info.terms.collision == -10.0);
  CHECK(s.reward == doctest::Approx(-10.0 + 1.0 / (0.2 + s.info.distance)));
}

TEST_CASE("episode truncates at the horizon") {
  ManipulatorParams p;
  TaskSpec task = make_task("free");
  task.horizon = 5;
  ReachingEnv env(p, task);
  env.reset(VecX::Constant(15, 1.45));
  StepResult s;
  for (int t = 0; t < 5; ++t) s = env.step(Vec3(1, 0, 0));
  CHECK(s.truncated);
  CHECK_FALSE(s.terminated);
  CHECK_THROWS_AS(env.step(Vec3::Zero()), Error);
}

TEST_CASE("success terminates the episode") {
  ManipulatorParams p;
  TaskSpec task = make_task("free");
  // Put the goal where the tip will be after one step.
  const ShapeSolution target = solve_forward(TendonCommand(3, 0, 0), VecX::Constant(15, 1.45), p);
  task.goal = target.tip + Vec3(0.5, 0, 0);
  ReachingEnv env(p, task);
  env.reset(VecX::Constant(15, 1.45));
  const StepResult s = env.step(Vec3(3, 0, 0));
  CHECK(s.info.success);
  CHECK(s.terminated);
  CHECK(s.info.terms.success == 50.0);
}

TEST_CASE("same design and actions give identical observations") {
  ManipulatorParams p;
  ReachingEnv a(p, one_obstacle_task()), b(p, one_obstacle_task());
  const VecX design = VecX::Constant(15, 0.9);
  a.reset(design);
  b.reset(design);
  for (int t = 0; t < 10; ++t) {
    const Vec3 act(std::sin(t), std::cos(t), 0.5);
    const StepResult x = a.step(act), y = b.step(act);
    CHECK(x.observation == y.observation);
    if (x.terminated || x.truncated) break;
  }
}

TEST_CASE("environment state round-trips") {
  ManipulatorParams p;
  ReachingEnv a(p, one_obstacle_task());
  a.reset(VecX::Constant(15, 1.1));
  a.step(Vec3(1, 2, 0));
  BinaryWriter w;
  a.save_state(w);
  ReachingEnv b(p, one_obstacle_task());
  BinaryReader r(w.bytes());
  b.load_state(r);
  const StepResult x = a.step(Vec3(0.5, 0, 1)), y = b.step(Vec3(0.5, 0, 1));
  CHECK(x.observation == y.observation);
  CHECK(x.reward == y.reward);
}

TEST_CASE("task presets") {
  CHECK(make_task("one-obstacle").obstacles.size() == 1);
  CHECK(make_task("one-obstacle").obstacles[0].plane_x == -25.0);
  const TaskSpec two = make_task("two-obstacles");
  REQUIRE(two.obstacles.size() == 2);
  CHECK(two.obstacles[1].plane_x == -60.0);
  CHECK(two.obstacles[1].z_min == 135.0);
  CHECK(two.obstacles[1].z_max == 200.0);
  CHECK(make_task("free").obstacles.empty());
  CHECK_THROWS_AS(make_task("maze"), Error);
  CHECK(one_obstacle_task().goal == Vec3(-50, 0, 50));
}

TEST_CASE("trace record fields") {
  ManipulatorParams p;
  ReachingEnv env(p, one_obstacle_task());
  env.reset(VecX::Constant(15, 1.45));
  const std::string line = trace_record(1, env.step(Vec3(1, 0, 0)));
  for (const char* key : {"\"t\"", "\"action\"", "\"d\"", "\"reward\"", "\"collision\"", "\"tip\"", "\"tensions\""}) {
    CHECK(line.find(key) != std::string::npos);
  }
}
