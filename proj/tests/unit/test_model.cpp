#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "origami/model.hpp"

using namespace origami;

namespace {

// Link lengths of a module in pose `pose`, computed from the plate vertices.
void link_lengths(const ModulePose& pose, const ManipulatorParams& p, Vec3* verticals, Vec3* diagonals) {
  const PlateGeometry g = initial_geometry(p);
  for (int i = 0; i < 3; ++i) {
    (*verticals)[i] = (pose.apply(g.bottom[i]) - g.bottom[i]).norm();
    const Vec3 bottom = g.bottom[diagonal_bottom_vertex(p.chirality, i)];
    const Vec3 top = pose.apply(g.bottom[diagonal_top_vertex(p.chirality, i)]);
    (*diagonals)[i] = (top - bottom).norm();
  }
}

}  // namespace

TEST_CASE("plate geometry and straight diagonal length") {
  ManipulatorParams p;
  p.vertical_link_length = 50.0;
  CHECK(p.plate_side() == doctest::Approx(30.0 * std::sqrt(3.0)));
  CHECK(p.b_ini() == doctest::Approx(72.111).epsilon(1e-4));
  const PlateGeometry g = initial_geometry(p);
  for (int i = 0; i < 3; ++i) {
    CHECK(g.bottom[i].norm() == doctest::Approx(30.0));
    CHECK(g.bottom[i][2] == 0.0);
    CHECK((g.bottom[i] - g.bottom[(i + 1) % 3]).norm() == doctest::Approx(p.plate_side()));
  }
}

TEST_CASE("parameter validation names the field") {
  ManipulatorParams p;
  p.n_modules = 0;
  try {
    p.validate();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("n_modules") != std::string::npos);
  }
  ManipulatorParams q;
  q.stiffness_min = 3.0;
  CHECK_THROWS_AS(q.validate(), Error);
}

TEST_CASE("bend angle and chord are inverse on the arc model") {
  const double b = 57.0;
  CHECK(chord_to_bend_angle(b, b) == doctest::Approx(0.0));
  CHECK(chord_to_bend_angle(2.0 / M_PI * b, b) == doctest::Approx(M_PI));
  for (double g : {0.05, 0.5, 1.0, 2.0, 3.0}) {
    const double chord = bend_angle_to_chord(g, b);
    // sin(g/2) / (g/2) evaluated directly
    CHECK(chord == doctest::Approx(b * std::sin(g / 2) / (g / 2)));
    CHECK(chord_to_bend_angle(chord, b) == doctest::Approx(g).epsilon(1e-10));
  }
  CHECK_THROWS_AS(chord_to_bend_angle(1.01 * b, b), Error);
  CHECK_THROWS_AS(chord_to_bend_angle(0.5 * b, b), Error);
}

TEST_CASE("module pose reproduces the commanded link lengths") {
  ManipulatorParams p;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(p.chord_min(), p.b_ini());
  for (int k = 0; k < 50; ++k) {
    const Vec3 chords(u(rng), u(rng), u(rng));
    const ModulePose pose = solve_module_pose(chords, p, ModulePose::rest(p));
    Vec3 v, d;
    link_lengths(pose, p, &v, &d);
    for (int i = 0; i < 3; ++i) {
      CHECK(v[i] == doctest::Approx(p.vertical_link_length).epsilon(1e-10));
      CHECK(d[i] == doctest::Approx(chords[i]).epsilon(1e-10));
    }
    // Proper rotation, top plate above the bottom plate.
    CHECK(pose.rotation.determinant() == doctest::Approx(1.0));
    CHECK(pose.translation[2] > 0.0);
  }
}

TEST_CASE("rest chords give the rest pose and zero energy") {
  ManipulatorParams p;
  const Vec3 rest = Vec3::Constant(p.b_ini());
  const ModulePose pose = solve_module_pose(rest, p, ModulePose::rest(p));
  CHECK((pose.rotation - Mat3::Identity()).norm() < 1e-12);
  CHECK((pose.translation - Vec3(0, 0, p.vertical_link_length)).norm() < 1e-12);
  const ModuleEnergy e = module_energy(rest, Vec3::Constant(1.0), p);
  CHECK(std::abs(e.energy) < 1e-15);
}

TEST_CASE("energy is positive away from rest and grows with stiffness") {
  ManipulatorParams p;
  const Vec3 chords(0.9 * p.b_ini(), p.b_ini(), 0.8 * p.b_ini());
  const double soft = module_energy(chords, Vec3::Constant(0.5), p).energy;
  const double stiff = module_energy(chords, Vec3::Constant(2.0), p).energy;
  CHECK(soft > 0.0);
  CHECK(stiff > soft);
  // VSJ term: 1/2 s gamma^2 for each bent diagonal.
  const ModuleEnergy e = module_energy(chords, Vec3(1.0, 2.0, 0.5), p);
  double vsj = 0.0;
  const Vec3 s(1.0, 2.0, 0.5);
  for (int i = 0; i < 3; ++i) {
    const double g = chord_to_bend_angle(chords[i], p.b_ini());
    vsj += 0.5 * s[i] * g * g;
  }
  CHECK(e.vsj_energy == doctest::Approx(vsj).epsilon(1e-12));
  CHECK(e.energy == doctest::Approx(e.vsj_energy + e.spherical_energy));
}

TEST_CASE("stack of rest modules is a straight column") {
  ManipulatorParams p;
  const VecX chords = VecX::Constant(p.n_chords(), p.b_ini());
  const StackResult s = stack_and_tip(chords, p);
  REQUIRE(s.world_poses.size() == static_cast<size_t>(p.n_modules));
  CHECK((s.tip - Vec3(0, 0, p.n_modules * p.vertical_link_length)).norm() < 1e-12);
}

TEST_CASE("module energy gradient matches finite differences") {
  ManipulatorParams p;
  ModuleModel m(p);
  const Vec3 chords(0.85 * p.b_ini(), 0.95 * p.b_ini(), 0.75 * p.b_ini());
  const Vec3 s(1.3, 0.7, 2.1);
  const auto e = m.evaluate(chords, s, ModulePose::rest(p), true);
  const double h = 1e-5;
  for (int i = 0; i < 3; ++i) {
    Vec3 a = chords, b = chords;
    a[i] += h;
    b[i] -= h;
    const double fd = (m.evaluate(a, s, e.pose, false).energy - m.evaluate(b, s, e.pose, false).energy) / (2 * h);
    CHECK(e.gradient[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("third turn maps each base vertex onto the next") {
  ManipulatorParams p;
  const PlateGeometry g = initial_geometry(p);
  const Mat3 R = third_turn();
  for (int i = 0; i < 3; ++i) CHECK((R * g.bottom[i] - g.bottom[(i + 1) % 3]).norm() < 1e-12);
}
