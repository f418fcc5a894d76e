#pragma once

#include <optional>
#include <vector>

#include "origami/model.hpp"

namespace origami {

// Commanded tendon displacements d_1..d_3 in mm.
using TendonCommand = Vec3;

// Throws kOutOfRange for negative entries. Commands past max_displacement()
// are accepted: the tendon then saturates at the force limit and slips.
void validate_command(const TendonCommand& d, const ManipulatorParams& params);
// Throws kDimensionMismatch / kOutOfRange.
void validate_stiffness(const VecX& stiffness, const ManipulatorParams& params);
void validate_shape(const VecX& chords, const ManipulatorParams& params);

// slack_i = (N b_ini - sum_j b_i^j) - d_i; the tendon constraint holds iff >= 0.
Vec3 tendon_slack(const VecX& chords, const TendonCommand& d,
                  const ManipulatorParams& params);

struct ShapeSolution {
  VecX chords;                       // B*, 3N
  double energy = 0.0;               // total stored energy
  VecX module_energy;                // per module
  double objective = 0.0;            // energy + exact-penalty term
  Vec3 tensions = Vec3::Zero();      // d(objective*)/d(d_i), clipped to [0, F_l]
  Vec3 multipliers = Vec3::Zero();   // tendon constraint multipliers at B*
  Vec3 slacks = Vec3::Zero();
  Vec3 tip = Vec3::Zero();
  std::vector<ModulePose> local_poses;
  std::vector<ModulePose> world_poses;
  bool converged = false;
  int iterations = 0;
  double stationarity = 0.0;  // reduced-gradient norm at exit
};

enum class TensionMode {
  kFiniteDifference,  // central difference of the optimal objective
  kMultiplier,        // reuse the constraint multipliers (no extra solves)
};

struct ForwardSolverOptions {
  double stationarity_tolerance = 1e-11;
  double step_tolerance = 1e-12;  // mm
  int max_iterations = 400;
  TensionMode tension_mode = TensionMode::kFiniteDifference;
  double tension_step = 1e-3;  // mm
};

// Minimizes E(B, S) + F_l * sum_i max(0, -slack_i) over the chord box with a
// primal active-set Newton method. The solver object holds only immutable
// geometry and may be shared across threads.
class ForwardSolver {
 public:
  explicit ForwardSolver(const ManipulatorParams& params,
                         ForwardSolverOptions options = {});

  const ManipulatorParams& params() const { return model_.params(); }
  const ForwardSolverOptions& options() const { return options_; }
  const ModuleModel& model() const { return model_; }

  ShapeSolution solve(const TendonCommand& d, const VecX& stiffness,
                      const ShapeSolution* warm = nullptr) const;

  // Objective of the penalized problem at an arbitrary feasible shape.
  double penalized_objective(const VecX& chords, const TendonCommand& d,
                             const VecX& stiffness) const;

 private:
  ShapeSolution solve_unchecked(const TendonCommand& d, const VecX& stiffness,
                                const ShapeSolution* warm,
                                bool with_tensions) const;

  ModuleModel model_;
  ForwardSolverOptions options_;
};

ShapeSolution solve_forward(const TendonCommand& d, const VecX& stiffness,
                            const ManipulatorParams& params,
                            const ShapeSolution* warm = nullptr,
                            const ForwardSolverOptions& options = {});

// Element t is warm-started from element t-1, the first from rest. Errors are
// rethrown with the failing index in the message.
std::vector<ShapeSolution> solve_trajectory(
    const std::vector<TendonCommand>& commands, const VecX& stiffness,
    const ManipulatorParams& params, const ForwardSolverOptions& options = {});

// Rest shape b_ini * 1.
VecX rest_shape(const ManipulatorParams& params);

}  // namespace origami
