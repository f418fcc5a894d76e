#pragma once

#include <array>
#include <vector>

#include "origami/common.hpp"

namespace origami {

// Which plate vertex the bottom end of diagonal link i attaches to.
//   kNextBottom: diagonal i spans P_{i+1} -> Q_i
//   kNextTop:    diagonal i spans P_i -> Q_{i+1}
enum class Chirality { kNextBottom, kNextTop };

struct ManipulatorParams {
  int n_modules = 5;
  double plate_circumradius = 30.0;    // mm
  double vertical_link_length = 25.0;  // mm
  double spherical_stiffness = 0.05;   // energy / rad^2
  double force_limit = 2.0;
  double stiffness_min = 0.4;
  double stiffness_max = 2.5;
  double chord_floor_factor = 0.65;
  Chirality chirality = Chirality::kNextBottom;

  int n_chords() const { return 3 * n_modules; }
  double plate_side() const;
  // Straight diagonal length; equals the material length of a bent link.
  double b_ini() const;
  double chord_min() const { return chord_floor_factor * b_ini(); }
  // Largest tendon shortening the chord box can absorb.
  double max_displacement() const;

  // Throws Error(kInvalidArgument) naming the offending field.
  void validate() const;
};

struct PlateGeometry {
  std::array<Vec3, 3> bottom;    // P_i, plate frame, z = 0
  std::array<Vec3, 3> top_rest;  // Q_i in the rest pose
  double side = 0.0;
  double b_ini = 0.0;
};

PlateGeometry initial_geometry(const ManipulatorParams& params);

// Index of the bottom / top vertex of diagonal link i.
int diagonal_bottom_vertex(Chirality chirality, int i);
int diagonal_top_vertex(Chirality chirality, int i);

// Rigid transform of a top plate relative to the plate below it. The top plate
// carries the same local vertex coordinates as the bottom plate, so the rest
// pose is (I, (0, 0, L_v)).
struct ModulePose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static ModulePose rest(const ManipulatorParams& params);
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  // Frame of a child expressed through this frame.
  ModulePose compose(const ModulePose& child) const;
};

struct PoseSolverOptions {
  double tolerance = 1e-12;  // mm, distance residual
  int max_iterations = 60;
  bool multi_start = true;
};

// Solves the six link-length constraints of one module for the top-plate pose.
// Throws kNoConvergence or kPlateInversion.
ModulePose solve_module_pose(const Vec3& chords, const ManipulatorParams& params,
                             const ModulePose& init,
                             const PoseSolverOptions& options = {});

// Circular-arc bend model: chord / b_ini = sin(g/2) / (g/2), g in [0, pi].
// Valid for chord in [(2/pi) b_ini, b_ini]; throws kOutOfRange otherwise.
double chord_to_bend_angle(double chord, double b_ini);
double bend_angle_to_chord(double gamma, double b_ini);

struct AngleSet {
  Vec3 gamma = Vec3::Zero();
  // [0,3) vertical links at P_i, [3,6) vertical links at Q_i,
  // [6,9) diagonal links at their bottom vertex, [9,12) at their top vertex.
  std::array<double, 12> sigma{};
};

AngleSet joint_angles(const ModulePose& pose, const Vec3& chords,
                      const ManipulatorParams& params);

struct ModuleEnergy {
  double energy = 0.0;
  double vsj_energy = 0.0;
  double spherical_energy = 0.0;
  AngleSet angles;
  ModulePose pose;
};

ModuleEnergy module_energy(const Vec3& chords, const Vec3& stiffness,
                           const ManipulatorParams& params);
ModuleEnergy module_energy(const Vec3& chords, const Vec3& stiffness,
                           const ManipulatorParams& params,
                           const ModulePose& init);

struct StackResult {
  std::vector<ModulePose> world_poses;  // frame of each module's top plate
  Vec3 tip = Vec3::Zero();
};

// Solves every module pose from rest and composes them bottom to top.
StackResult stack_and_tip(const VecX& chords, const ManipulatorParams& params);
StackResult stack_and_tip(const std::vector<ModulePose>& local_poses);

// Per-module evaluator with cached geometry; the forward solver works through
// this so each call can carry its own warm-start pose.
class ModuleModel {
 public:
  explicit ModuleModel(const ManipulatorParams& params);

  const ManipulatorParams& params() const { return params_; }
  const PlateGeometry& geometry() const { return geometry_; }

  struct Evaluation {
    double energy = 0.0;
    double vsj_energy = 0.0;
    double spherical_energy = 0.0;
    ModulePose pose;
    Vec3 gradient = Vec3::Zero();            // dE/db
    Vec3 spherical_gradient = Vec3::Zero();  // d(spherical term)/db
  };

  ModulePose solve_pose(const Vec3& chords, const ModulePose& init,
                        const PoseSolverOptions& options = {}) const;
  AngleSet angles(const ModulePose& pose, const Vec3& chords) const;
  Evaluation evaluate(const Vec3& chords, const Vec3& stiffness,
                      const ModulePose& init, bool with_gradient) const;
  // VSJ part exact, spherical part by central differences of its gradient.
  Mat3 hessian(const Vec3& chords, const Vec3& stiffness,
               const Evaluation& at) const;

  // 1/2 gamma(b)^2 and its first two derivatives in b.
  struct BendTerm {
    double value, first, second;
  };
  BendTerm bend_term(double chord) const;

 private:
  ModulePose newton(const Vec3& chords, const ModulePose& init,
                    const PoseSolverOptions& options, bool* converged) const;
  double spherical_energy_and_gradient(const ModulePose& pose,
                                       const Vec3& chords,
                                       Vec3* db_gradient) const;

  ManipulatorParams params_;
  PlateGeometry geometry_;
  std::array<int, 3> diag_bottom_{};
  std::array<int, 3> diag_top_{};
  std::array<Vec3, 6> rest_dir_;  // vertical 0..2, diagonal 3..5
};

// Rotation by 120 degrees about +z, mapping P_i onto P_{i+1}.
Mat3 third_turn();

}  // namespace origami
