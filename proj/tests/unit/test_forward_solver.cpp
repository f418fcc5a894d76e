#include <doctest.h>

#include <random>

#include "origami/forward_solver.hpp"
#include "origami/kinematics.hpp"

using namespace origami;

namespace {

VecX random_stiffness(std::mt19937_64& rng, const ManipulatorParams& p) {
  std::uniform_real_distribution<double> u(p.stiffness_min, p.stiffness_max);
  VecX s(p.n_chords());
  for (int i = 0; i < s.size(); ++i) s[i] = u(rng);
  return s;
}

}  // namespace

TEST_CASE("tendon slack worked example") {
  ManipulatorParams p;
  p.vertical_link_length = 50.0;  // b_ini = 72.111
  VecX chords = VecX::Constant(15, p.b_ini());
  // Tendon 1 runs through chords 0, 3, 6, 9, 12; make them sum to 350.
  for (int j = 0; j < 5; ++j) chords[3 * j] = 70.0;
  const Vec3 slack = tendon_slack(chords, TendonCommand(8.0, 0.0, 0.0), p);
  CHECK(slack[0] == doctest::Approx(5 * p.b_ini() - 350.0 - 8.0));
  CHECK(slack[0] == doctest::Approx(2.555).epsilon(1e-3));
  CHECK(slack[1] == doctest::Approx(0.0));
}

TEST_CASE("input validation") {
  ManipulatorParams p;
  CHECK_THROWS_AS(validate_command(TendonCommand(-1.0, 0, 0), p), Error);
  CHECK_NOTHROW(validate_command(TendonCommand(10, 0, 0), p));
  try {
    validate_stiffness(VecX::Constant(12, 1.0), p);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimensionMismatch);
  }
  VecX s = VecX::Constant(15, 1.0);
  s[4] = 3.0;
  try {
    validate_stiffness(s, p);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kOutOfRange);
  }
  VecX b = VecX::Constant(15, p.b_ini());
  b[2] = 0.5 * p.b_ini();
  CHECK_THROWS_AS(validate_shape(b, p), Error);
}

TEST_CASE("zero command is the rest shape with slack tendons") {
  ManipulatorParams p;
  const ShapeSolution sol = solve_forward(TendonCommand::Zero(), VecX::Constant(15, 1.45), p);
  CHECK(sol.converged);
  CHECK(sol.energy == doctest::Approx(0.0));
  CHECK(sol.tensions.cwiseAbs().maxCoeff() < 1e-9);
  CHECK((sol.chords - rest_shape(p)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("solution is a local minimum of the penalized objective") {
  ManipulatorParams p;
  const ForwardSolver solver(p);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    const VecX s = random_stiffness(rng, p);
    const TendonCommand d(0.6 * p.max_displacement(), 0.3 * p.max_displacement(), 0.1 * p.max_displacement());
    const ShapeSolution sol = solver.solve(d, s);
    const double f0 = solver.penalized_objective(sol.chords, d, s);
    CHECK(f0 == doctest::Approx(sol.objective).epsilon(1e-10));
    for (int t = 0; t < 20; ++t) {
      VecX b = sol.chords;
      for (int i = 0; i < b.size(); ++i) b[i] += 0.05 * g(rng);
      b = b.cwiseMax(p.chord_min()).cwiseMin(p.b_ini());
      CHECK(solver.penalized_objective(b, d, s) >= f0 - 1e-9);
    }
  }
}

TEST_CASE("warm and cold starts agree") {
  ManipulatorParams p;
  const ForwardSolver solver(p);
  std::mt19937_64 rng(12);
  const VecX s = random_stiffness(rng, p);
  const ShapeSolution near = solver.solve(TendonCommand(20, 10, 5), s);
  const TendonCommand d(24, 12, 4);
  const ShapeSolution cold = solver.solve(d, s);
  const ShapeSolution warm = solver.solve(d, s, &near);
  CHECK(std::abs(warm.objective - cold.objective) <= 1e-6 * std::abs(cold.objective));
}

TEST_CASE("trajectory is continuous along the schedule") {
  ManipulatorParams p;
  ActuationSchedule schedule;
  const TrajectoryResult t = demo_trajectory(named_stiffness("S1", p.n_chords()), schedule, p);
  REQUIRE(t.solutions.size() == 50);
  double jump = (t.solutions[0].tip - Vec3(0, 0, p.n_modules * p.vertical_link_length)).norm();
  for (size_t k = 1; k < t.solutions.size(); ++k) {
    jump = std::max(jump, (t.solutions[k].tip - t.solutions[k - 1].tip).norm());
  }
  CHECK(jump < 10.0);
}

TEST_CASE("tensions stay within the force limit and vanish on slack tendons") {
  ManipulatorParams p;
  const ForwardSolver solver(p);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, p.max_displacement());
  for (int k = 0; k < 10; ++k) {
    const ShapeSolution sol = solver.solve(TendonCommand(u(rng), u(rng), u(rng)), random_stiffness(rng, p));
    for (int i = 0; i < 3; ++i) {
      CHECK(sol.tensions[i] >= 0.0);
      CHECK(sol.tensions[i] <= p.force_limit + 1e-6);
      if (sol.slacks[i] > 1e-6) CHECK(sol.tensions[i] < 1e-6);
    }
  }
}

TEST_CASE("multiplier tensions match finite-difference tensions") {
  ManipulatorParams p;
  ForwardSolverOptions fd;
  ForwardSolverOptions mult;
  mult.tension_mode = TensionMode::kMultiplier;
  const VecX s = VecX::Constant(15, 1.2);
  const TendonCommand d(30, 15, 5);
  const ShapeSolution a = solve_forward(d, s, p, nullptr, fd);
  const ShapeSolution b = solve_forward(d, s, p, nullptr, mult);
  for (int i = 0; i < 3; ++i) CHECK(a.tensions[i] == doctest::Approx(b.tensions[i]).epsilon(1e-4));
}

TEST_CASE("pulling a tendon lowers its chords and tilts toward it") {
  ManipulatorParams p;
  const ShapeSolution sol = solve_forward(TendonCommand(30, 0, 0), VecX::Constant(15, 1.0), p);
  // Tendon 1 is taut: its chords absorb the displacement.
  double sum = 0.0;
  for (int j = 0; j < p.n_modules; ++j) sum += sol.chords[3 * j];
  CHECK(sum == doctest::Approx(p.n_modules * p.b_ini() - 30.0).epsilon(1e-9));
  CHECK(sol.tip[2] < p.n_modules * p.vertical_link_length);
}

TEST_CASE("trajectory errors carry the failing index") {
  ManipulatorParams p;
  std::vector<TendonCommand> cmds = {TendonCommand(1, 0, 0), TendonCommand(-1, 0, 0)};
  try {
    solve_trajectory(cmds, VecX::Constant(15, 1.0), p);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}
