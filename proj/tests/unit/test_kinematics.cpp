#include <doctest.h>

#include <sstream>

#include "origami/kinematics.hpp"

using namespace origami;

TEST_CASE("actuation schedule endpoints") {
  const TendonCommand end = ActuationSchedule::at(1.0);
  CHECK(end[0] == doctest::Approx(128.0));
  CHECK(end[1] == doctest::Approx(100.0));
  CHECK(end[2] == doctest::Approx(100.0));
  const TendonCommand mid = ActuationSchedule::at(0.5);
  CHECK(mid[1] == doctest::Approx(100.0 * std::sin(M_PI / 4)));
  ActuationSchedule s;
  const auto t = s.times();
  REQUIRE(t.size() == 50);
  CHECK(t.front() == doctest::Approx(0.02));
  CHECK(t.back() == doctest::Approx(1.0));
}

TEST_CASE("named stiffness sets") {
  const VecX s1 = named_stiffness("S1", 15);
  CHECK(s1[0] == doctest::Approx(1.37));
  CHECK(s1[1] == doctest::Approx(1.65));
  CHECK(s1[2] == doctest::Approx(0.66));
  // Padding repeats the 12-entry pattern.
  for (int i = 0; i < 3; ++i) CHECK(s1[12 + i] == s1[i]);
  const VecX s4 = named_stiffness("S4", 15);
  for (int j = 0; j < 5; ++j) {
    CHECK(s4[3 * j] == doctest::Approx(2.5));
    CHECK(s4[3 * j + 1] == doctest::Approx(0.8));
    CHECK(s4[3 * j + 2] == doctest::Approx(0.8));
  }
  // S2 and S3 are S1 with the tendon labels rotated.
  const VecX s2 = named_stiffness("S2", 15);
  CHECK(s2[1] == doctest::Approx(s1[0]));
  try {
    named_stiffness("S9", 15);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    for (const auto& n : stiffness_set_names()) CHECK(msg.find(n) != std::string::npos);
  }
}

TEST_CASE("workspace sampling is worker-independent") {
  ManipulatorParams p;
  const VecX s = named_stiffness("S4", 15);
  const WorkspaceCloud a = sample_workspace(s, 40, 5, p, 1);
  const WorkspaceCloud b = sample_workspace(s, 40, 5, p, 3);
  REQUIRE(a.tips.size() == b.tips.size());
  for (size_t i = 0; i < a.tips.size(); ++i) {
    CHECK(a.commands[i] == b.commands[i]);
    CHECK(a.tips[i] == b.tips[i]);
  }
  CHECK(workspace_command(5, 7, p) == a.commands[7]);
}

TEST_CASE("rotated design rotates the workspace") {
  ManipulatorParams p;
  const VecX s = named_stiffness("S1", 15);
  VecX s2(15);
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 3; ++i) s2[3 * j + (i + 1) % 3] = s[3 * j + i];
  const Mat3 R = third_turn();
  for (int k = 0; k < 10; ++k) {
    const TendonCommand d = workspace_command(8, k, p);
    const TendonCommand d2(d[2], d[0], d[1]);
    const Vec3 a = solve_forward(d, s, p).tip;
    const Vec3 b = solve_forward(d2, s2, p).tip;
    CHECK((b - R * a).norm() < 1e-9);
  }
}

TEST_CASE("voxel comparison counts") {
  std::vector<Vec3> a = {Vec3(0.1, 0.1, 0.1), Vec3(0.2, 0.2, 0.2), Vec3(6, 0, 0)};
  std::vector<Vec3> b = {Vec3(1, 1, 1), Vec3(-1, 0, 0)};
  const VoxelComparison v = workspace_compare(a, b, 5.0);
  CHECK(v.count_a == 2);
  CHECK(v.count_b == 2);
  CHECK(v.intersection == 1);
  CHECK(v.union_count == 3);
  CHECK(v.symmetric_difference == 2);
  CHECK(v.difference_fraction() == doctest::Approx(2.0 / 3.0));
  CHECK(workspace_compare(a, a, 5.0).difference_fraction() == 0.0);
}

TEST_CASE("csv headers") {
  ManipulatorParams p;
  ActuationSchedule s;
  s.samples = 2;
  std::ostringstream out;
  write_trajectory_csv(out, demo_trajectory(named_stiffness("S1", 15), s, p));
  CHECK(out.str().rfind("t,d1,d2,d3,tip_x,tip_y,tip_z,E,tension1,tension2,tension3\n", 0) == 0);
  std::ostringstream w;
  write_workspace_csv(w, sample_workspace(named_stiffness("S1", 15), 3, 1, p));
  CHECK(w.str().rfind("sample_id,d1,d2,d3,tip_x,tip_y,tip_z,converged\n", 0) == 0);
}
